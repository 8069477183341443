"""Gaussian comparison methods: inverse-variance pooling and CD combination.

Both work on per-study effect estimates and standard errors. When only
intervals are available these are recovered with
:func:`elmeta.types.recover_arrays`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .quantiles import normal_cdf, normal_quantile
from .types import AnalysisResult, MetaDataset, Method, recover_arrays


@dataclass(frozen=True)
class WeightedSummaries:
    """Study centers and standard errors plus a between-study variance.

    ``s_k**2 = sds_k**2 + tau2`` and the CD weights are ``w_k = 1 / s_k``.
    """

    centers: np.ndarray
    sds: np.ndarray
    tau2: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float).ravel()
        s = np.asarray(self.sds, dtype=float).ravel()
        if c.shape != s.shape or c.size == 0:
            raise ValueError("centers and sds must be non-empty and of equal length")
        if not np.all(s > 0) or not np.all(np.isfinite(s)):
            raise ValueError("sds must be finite and positive")
        if not self.tau2 >= 0:
            raise ValueError(f"tau2 must be nonnegative, got {self.tau2}")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "sds", s)
        object.__setattr__(self, "tau2", float(self.tau2))

    @classmethod
    def from_dataset(cls, dataset: MetaDataset, tau2: float = 0.0) -> "WeightedSummaries":
        centers, sds = recover_arrays(dataset)
        return cls(centers, sds, tau2)

    def with_tau2(self, tau2: float) -> "WeightedSummaries":
        return WeightedSummaries(self.centers, self.sds, tau2)

    @property
    def K(self) -> int:
        return self.centers.size

    @property
    def s(self) -> np.ndarray:
        return np.sqrt(self.sds ** 2 + self.tau2)

    @property
    def weights(self) -> np.ndarray:
        return 1.0 / self.s


# ---------------------------------------------------------------------------
# Between-study variance
# ---------------------------------------------------------------------------

def cochran_q(summaries: WeightedSummaries) -> float:
    a = 1.0 / summaries.sds ** 2
    theta_f = np.sum(a * summaries.centers) / np.sum(a)
    return float(np.sum(a * (summaries.centers - theta_f) ** 2))


def dl_tau2(summaries: WeightedSummaries) -> float:
    """DerSimonian-Laird moment estimator of tau^2, truncated at zero."""
    a = 1.0 / summaries.sds ** 2
    q = cochran_q(summaries)
    denom = np.sum(a) - np.sum(a ** 2) / np.sum(a)
    if denom <= 0:
        return 0.0
    return max(0.0, float((q - (summaries.K - 1)) / denom))


def reml_loglik(tau2: float, centers, sds) -> float:
    """Restricted log-likelihood of the Gaussian random-effects model (no constant)."""
    v = np.asarray(sds, dtype=float) ** 2 + tau2
    w = 1.0 / v
    y = np.asarray(centers, dtype=float)
    theta = np.sum(w * y) / np.sum(w)
    return float(-0.5 * np.sum(np.log(v)) - 0.5 * math.log(np.sum(w))
                 - 0.5 * np.sum(w * (y - theta) ** 2))


def _reml_score(tau2: float, y: np.ndarray, var: np.ndarray) -> float:
    w = 1.0 / (var + tau2)
    sw = np.sum(w)
    theta = np.sum(w * y) / sw
    return float(0.5 * (-sw + np.sum(w ** 2) / sw + np.sum(w ** 2 * (y - theta) ** 2)))


def reml_tau2(summaries: WeightedSummaries, *, tol: float = 1e-8, grid_size: int = 400) -> float:
    """REML estimate of tau^2 on ``[0, 10 * (max Y - min Y)**2]``.

    The score is scanned on a mixed linear/geometric grid; each sign change
    from positive to negative brackets a local maximum that is then located
    with Brent's root finder. The best of these and the two boundaries wins.
    """
    y = summaries.centers
    var = summaries.sds ** 2
    tau_max = 10.0 * float(y.max() - y.min()) ** 2
    if tau_max <= 0:
        return 0.0
    grid = np.unique(np.concatenate([
        [0.0],
        np.geomspace(tau_max * 1e-10, tau_max, grid_size),
        np.linspace(0.0, tau_max, grid_size),
    ]))
    score = np.array([_reml_score(t, y, var) for t in grid])
    candidates = [0.0, tau_max]
    for i in np.flatnonzero((score[:-1] > 0) & (score[1:] <= 0)):
        a, b = grid[i], grid[i + 1]
        if score[i + 1] == 0:
            candidates.append(float(b))
            continue
        root = optimize.brentq(_reml_score, a, b, args=(y, var),
                               xtol=min(tol, 1e-12 * max(1.0, b)), rtol=4 * np.finfo(float).eps)
        candidates.append(float(root))
    values = [reml_loglik(t, y, summaries.sds) for t in candidates]
    return candidates[int(np.argmax(values))]


TAU2_ESTIMATORS = {"DL": dl_tau2, "REML": reml_tau2}


def estimate_tau2(summaries: WeightedSummaries, estimator: str) -> float:
    try:
        fn = TAU2_ESTIMATORS[estimator.upper()]
    except KeyError:
        raise ValueError(f"unknown tau2 estimator {estimator!r}") from None
    return fn(summaries)


# ---------------------------------------------------------------------------
# Intervals
# ---------------------------------------------------------------------------

def conventional_ci(summaries: WeightedSummaries, beta: float = 0.05,
                    method: Method | str | None = None) -> AnalysisResult:
    """Inverse-variance pooled estimate with a Wald interval."""
    if method is None:
        method = Method.CONVENTIONAL_FE if summaries.tau2 == 0 else Method.CONVENTIONAL_RE_DL
    prec = 1.0 / summaries.s ** 2
    total = np.sum(prec)
    est = float(np.sum(prec * summaries.centers) / total)
    half = normal_quantile(1.0 - beta / 2.0) / math.sqrt(total)
    return AnalysisResult(method, est, est - half, est + half, 1.0 - beta,
                          summaries.tau2, {"se": 1.0 / math.sqrt(total)})


def cd_function(summaries: WeightedSummaries):
    """Combined confidence distribution ``H_c(theta)`` as a vectorised callable."""
    w = summaries.weights
    s = summaries.s
    y = summaries.centers
    norm = math.sqrt(np.sum(w ** 2))

    def h_c(theta):
        theta = np.asarray(theta, dtype=float)
        arg = np.sum(w * (theta[..., None] - y) / s, axis=-1) / norm
        out = normal_cdf(arg)
        return float(out) if out.ndim == 0 else out

    return h_c


def cd_quantile(summaries: WeightedSummaries, u: float) -> float:
    """Solve ``H_c(theta) = u`` in closed form (``H_c`` is linear inside ``Phi``)."""
    w = summaries.weights
    s = summaries.s
    y = summaries.centers
    a = np.sum(w / s)
    b = np.sum(w * y / s)
    return float((normal_quantile(u) * math.sqrt(np.sum(w ** 2)) + b) / a)


def cd_ci(summaries: WeightedSummaries, beta: float = 0.05,
          method: Method | str | None = None) -> AnalysisResult:
    if method is None:
        method = Method.CD_FE if summaries.tau2 == 0 else Method.CD_RE
    lo = cd_quantile(summaries, beta / 2.0)
    hi = cd_quantile(summaries, 1.0 - beta / 2.0)
    est = cd_quantile(summaries, 0.5)
    return AnalysisResult(method, est, lo, hi, 1.0 - beta, summaries.tau2)
