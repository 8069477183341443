"""Empirical likelihood for combining study confidence intervals.

Four estimating functions are supported, all built from the reported
intervals ``[L_i, U_i]`` at a common level ``1 - alpha``:

``EL-RE``  symmetry equation ``(U_i + L_i - 2 theta) / (U_i - L_i)``
``EL1``    coverage indicator ``1{L_i <= theta <= U_i} - (1 - alpha)``
``EL2``    symmetry equation scaled by ``z_{1 - alpha/2}``
``EL3``    the indicator and scaled symmetry equations stacked (r = 2)

For a fixed ``theta`` the empirical likelihood is the maximum of
``prod p_i`` over probability vectors satisfying the moment constraint.
It is computed through the convex dual in the Lagrange multiplier, see
:func:`solve_dual`.  ``-2 log R(theta)`` is calibrated against
``chi2(r)`` to give confidence sets.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import InfeasibleHull, NoConvergence, NoFeasibleTheta
from .quantiles import chi2_quantile, normal_quantile
from .types import AnalysisResult, MetaDataset, Method

DUAL_TOL = 1e-12
DUAL_MAX_ITER = 100
# Angular slack when deciding whether the origin lies on a hull edge.
_ANGLE_EPS = 1e-12
_EPS = np.finfo(float).eps


class Variant(str, enum.Enum):
    RE = "EL-RE"
    INDICATOR = "EL1"
    SYMMETRY = "EL2"
    BOTH = "EL3"

    @property
    def dim(self) -> int:
        return 2 if self is Variant.BOTH else 1

    @property
    def method(self) -> Method:
        return Method(self.value)


# ---------------------------------------------------------------------------
# Inner maximisation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DualSolution:
    lam: np.ndarray
    log_lik: float
    weights: np.ndarray
    iterations: int


def hull_contains_origin(v: np.ndarray) -> bool:
    """True when the origin is strictly inside the convex hull of the rows.

    Points on the boundary count as outside: the constraint could only be
    met by putting zero weight on some study.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    r = v.shape[1]
    if r == 1:
        col = v[:, 0]
        if not np.any(col):
            return True
        return bool(col.min() < 0.0 < col.max())
    if r == 2:
        nz = v[np.any(v != 0.0, axis=1)]
        if nz.shape[0] == 0:
            return True
        if nz.shape[0] < 3:
            return False
        ang = np.sort(np.arctan2(nz[:, 1], nz[:, 0]))
        gaps = np.diff(ang)
        wrap = 2.0 * math.pi - (ang[-1] - ang[0])
        return bool(max(gaps.max(initial=0.0), wrap) < math.pi - _ANGLE_EPS)
    raise ValueError(f"only 1- and 2-dimensional estimating equations are supported, got r={r}")


def _roundoff_floor(v: np.ndarray, lam: np.ndarray, z: np.ndarray) -> float:
    # Propagated rounding error of sum v_i / z_i when z_i = 1 + lam'v_i is
    # formed from large cancelling terms.
    a = np.abs(v).max(axis=1)
    return 64.0 * _EPS * float(np.sum(a * (1.0 + a * np.abs(lam).sum()) / z ** 2))


def _solve_dual_1d(x: np.ndarray, tol: float, max_iter: int):
    # g(lam) = sum x / (1 + lam x) is strictly decreasing on the domain,
    # so a Newton step that leaves the bracket is replaced by bisection.
    lo = -1.0 / x.max()
    hi = -1.0 / x.min()
    lam = 0.0
    for it in range(1, max_iter + 1):
        z = 1.0 + lam * x
        g = np.sum(x / z)
        if abs(g) <= tol or abs(g) <= _roundoff_floor(x[:, None], np.array([lam]), z):
            return lam, it
        if g > 0:
            lo = lam
        else:
            hi = lam
        dg = -np.sum((x / z) ** 2)
        cand = lam - g / dg
        if not lo < cand < hi:
            cand = 0.5 * (lo + hi)
        if cand == lam:
            return lam, it
        lam = cand
    z = 1.0 + lam * x
    if abs(np.sum(x / z)) <= 100.0 * max(tol, _roundoff_floor(x[:, None], np.array([lam]), z)):
        return lam, max_iter
    raise NoConvergence(
        "1-D dual did not converge",
        {"lambda": lam, "bracket": (lo, hi), "residual": float(np.sum(x / z))},
    )


def _solve_dual_nd(v: np.ndarray, tol: float, max_iter: int):
    k, r = v.shape
    lam = np.zeros(r)
    z = np.ones(k)
    for it in range(1, max_iter + 1):
        inv = 1.0 / z
        grad = v.T @ inv
        if np.max(np.abs(grad)) <= max(tol, _roundoff_floor(v, lam, z)):
            return lam, it
        jac = v * inv[:, None]
        hess = jac.T @ jac
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence("singular dual Hessian", {"lambda": lam.tolist()}) from exc
        if np.max(np.abs(step)) <= 1e-13 * (1.0 + np.max(np.abs(lam))):
            # lam is already resolved to working precision
            return lam, it
        slope = float(grad @ step)
        f0 = float(np.sum(np.log(z)))
        gnorm = float(np.max(np.abs(grad)))
        # An increase this small cannot be seen in f, so fall back to
        # requiring a smaller gradient.
        flat = slope < 1e-12 * max(1.0, abs(f0))
        # Step halving: stay inside the domain 1 + lam'v > 0, then require
        # sufficient increase of sum log(1 + lam'v).
        t = 1.0
        while True:
            new = lam + t * step
            znew = 1.0 + v @ new
            if np.all(znew > 0.0):
                if flat:
                    if np.max(np.abs(v.T @ (1.0 / znew))) < gnorm:
                        break
                elif np.sum(np.log(znew)) >= f0 + 1e-4 * t * slope:
                    break
            t *= 0.5
            if t < 1e-30:
                if flat:
                    return lam, it
                raise NoConvergence("step halving underflow", {"lambda": lam.tolist()})
        lam, z = new, znew
    grad = v.T @ (1.0 / z)
    if np.max(np.abs(grad)) <= 100.0 * max(tol, _roundoff_floor(v, lam, z)):
        return lam, max_iter
    raise NoConvergence(
        "dual Newton did not converge",
        {"lambda": lam.tolist(), "residual": np.abs(grad).max().item()},
    )


def solve_dual(vectors, target=None, *, tol: float = DUAL_TOL,
               max_iter: int = DUAL_MAX_ITER) -> DualSolution:
    """Maximise ``sum log p_i`` subject to ``sum p_i (v_i - target) = 0``.

    With ``x_i = v_i - target`` the optimal weights are
    ``p_i = 1 / (K (1 + lam' x_i))`` where ``lam`` maximises the concave
    function ``sum log(1 + lam' x_i)``.

    Parameters
    ----------
    vectors : array_like, shape (K,) or (K, r)
    target : array_like of length r, optional
        Constraint value; zero when omitted.

    Returns
    -------
    DualSolution

    Raises
    ------
    InfeasibleHull
        ``target`` is not strictly inside the convex hull of ``vectors``.
    NoConvergence
        Newton iterations exhausted; diagnostics attached.
    """
    v = np.asarray(vectors, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if target is not None:
        v = v - np.asarray(target, dtype=float).reshape(1, -1)
    k, r = v.shape
    if k < 2:
        raise ValueError("need at least two estimating vectors")
    if not np.all(np.isfinite(v)):
        raise ValueError("estimating vectors must be finite")
    if not hull_contains_origin(v):
        raise InfeasibleHull("constraint target not strictly inside the convex hull")
    scale_tol = tol * max(1.0, float(np.abs(v).max())) * k
    if not np.any(v):
        lam, iters = np.zeros(r), 0
    elif r == 1:
        lam1, iters = _solve_dual_1d(v[:, 0], scale_tol, max_iter)
        lam = np.array([lam1])
    else:
        lam, iters = _solve_dual_nd(v, scale_tol, max_iter)
    z = 1.0 + v @ lam
    weights = 1.0 / (k * z)
    log_lik = float(-k * math.log(k) - np.sum(np.log(z)))
    return DualSolution(lam, log_lik, weights, iters)


# ---------------------------------------------------------------------------
# Estimating functions
# ---------------------------------------------------------------------------

def coverage_log_lik(m, k: int, alpha: float):
    """Closed-form log EL under the coverage constraint with ``m`` hits.

    Returns ``-inf`` when ``m`` is 0 or ``k`` (constraint unattainable).
    """
    m = np.asarray(m, dtype=float)
    out = np.full(m.shape, -np.inf)
    ok = (m >= 1) & (m <= k - 1)
    mm = m[ok]
    out[ok] = mm * np.log((1.0 - alpha) / mm) + (k - mm) * np.log(alpha / (k - mm))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ElEvaluation:
    theta: float
    neg2logR: float
    lam: np.ndarray
    feasible: bool
    weights: np.ndarray | None = None
    log_lik: float = -math.inf


@dataclass(frozen=True)
class ProfileMax:
    theta_hat: float
    log_lik_max: float
    attained: bool = True
    diagnostics: dict[str, Any] = field(default_factory=dict)


class EstimatingFunction:
    """Estimating equations of one EL variant bound to a dataset.

    The supremum of the likelihood over ``theta`` is computed eagerly, so an
    instance is read-only after construction.

    Raises
    ------
    NoFeasibleTheta
        No ``theta`` gives a feasible constraint set.
    """

    def __init__(self, dataset: MetaDataset, variant: Variant | str):
        self.dataset = dataset
        self.variant = Variant(variant)
        self.K = dataset.K
        self.alpha = dataset.alpha
        self.z = normal_quantile(1.0 - self.alpha / 2.0)
        self.lower = np.asarray(dataset.lower, dtype=float)
        self.upper = np.asarray(dataset.upper, dtype=float)
        self.mid = (self.lower + self.upper) / 2.0
        # W_i(theta) = slope_i * (mid_i - theta)
        self.slope = 2.0 / (self.upper - self.lower)
        if self.variant is Variant.RE:
            self.sym_scale = 1.0
        else:
            self.sym_scale = self.z
        if self.variant in (Variant.INDICATOR, Variant.BOTH):
            self._build_partition()
        self.profile = self._profile_max()

    @property
    def r(self) -> int:
        return self.variant.dim

    @property
    def target(self) -> np.ndarray:
        if self.variant is Variant.INDICATOR:
            return np.array([1.0 - self.alpha])
        if self.variant is Variant.BOTH:
            return np.array([1.0 - self.alpha, 0.0])
        return np.zeros(1)

    # -- raw estimating vectors -------------------------------------------

    def symmetry(self, theta: float) -> np.ndarray:
        return self.sym_scale * self.slope * (self.mid - theta)

    def indicator(self, theta: float) -> np.ndarray:
        return ((self.lower <= theta) & (theta <= self.upper)).astype(float)

    def vectors(self, theta: float) -> np.ndarray:
        """Uncentred estimating vectors at ``theta``, shape (K, r)."""
        if self.variant is Variant.INDICATOR:
            return self.indicator(theta)[:, None]
        if self.variant is Variant.BOTH:
            return np.column_stack([self.indicator(theta), self.symmetry(theta)])
        return self.symmetry(theta)[:, None]

    # -- likelihood at a point ---------------------------------------------

    def _dual_both(self, theta: float, ind: np.ndarray) -> DualSolution | None:
        v = np.column_stack([ind - (1.0 - self.alpha), self.symmetry(theta)])
        try:
            return solve_dual(v)
        except InfeasibleHull:
            return None

    def _solve_at(self, theta: float):
        """Return ``(log_lik, lam, weights)``; ``log_lik = -inf`` if infeasible."""
        if self.variant is Variant.INDICATOR:
            m = int(self.indicator(theta).sum())
            ll = coverage_log_lik(m, self.K, self.alpha)
            if not math.isfinite(ll):
                return -math.inf, np.full(1, np.nan), None
            a = self.alpha
            lam = (m / (self.K * (1.0 - a)) - 1.0) / a
            ind = self.indicator(theta)
            w = np.where(ind > 0, (1.0 - a) / m, a / (self.K - m))
            return ll, np.array([lam]), w
        if self.variant is Variant.BOTH:
            sol = self._dual_both(theta, self.indicator(theta))
        else:
            try:
                sol = solve_dual(self.symmetry(theta))
            except InfeasibleHull:
                sol = None
        if sol is None:
            return -math.inf, np.full(self.r, np.nan), None
        return sol.log_lik, sol.lam, sol.weights

    def log_lik(self, theta: float) -> float:
        return self._solve_at(float(theta))[0]

    def neg2logR(self, theta: float) -> ElEvaluation:
        theta = float(theta)
        ll, lam, w = self._solve_at(theta)
        if not math.isfinite(ll):
            return ElEvaluation(theta, math.inf, lam, False, None, -math.inf)
        stat = max(0.0, -2.0 * (ll - self.profile.log_lik_max))
        return ElEvaluation(theta, stat, lam, True, w, ll)

    # -- breakpoint partition (indicator variants) -------------------------

    def _build_partition(self):
        bp = np.unique(np.concatenate([self.lower, self.upper]))
        self.breakpoints = bp
        ls = np.sort(self.lower)
        us = np.sort(self.upper)
        n = bp.size
        # Segment j (0..n) is the open interval (bp[j-1], bp[j]).
        seg = np.zeros(n + 1, dtype=int)
        seg[1:] = np.searchsorted(ls, bp, side="right") - np.searchsorted(us, bp, side="right")
        pts = np.searchsorted(ls, bp, side="right") - np.searchsorted(us, bp, side="left")
        self.segment_counts = seg
        self.point_counts = pts

    def _segment_bounds(self, j: int) -> tuple[float, float]:
        bp = self.breakpoints
        lo = bp[j - 1] if j > 0 else -math.inf
        hi = bp[j] if j < bp.size else math.inf
        return lo, hi

    def _segment_indicator(self, j: int) -> np.ndarray:
        lo, hi = self._segment_bounds(j)
        return ((self.lower <= lo) & (self.upper >= hi)).astype(float)

    def _segment_log_lik(self, j: int, theta: float, ind: np.ndarray | None = None) -> float:
        """EL3 log likelihood using segment ``j``'s indicator at ``theta``.

        ``theta`` may be an endpoint of the segment, giving the one-sided
        limit of the likelihood from inside the segment.
        """
        if ind is None:
            ind = self._segment_indicator(j)
        sol = self._dual_both(theta, ind)
        return -math.inf if sol is None else sol.log_lik

    def _segment_peak(self, j: int) -> tuple[float, float, bool]:
        """Best point of open segment ``j`` for EL3.

        With the indicator fixed the likelihood is quasi-concave in theta,
        peaking at the weighted midpoint of the coverage-only optimum. If
        that point falls outside the segment the supremum is the limit at
        the nearest endpoint. Returns ``(theta, log_lik, attained)``.
        """
        m = int(self.segment_counts[j])
        ll_free = coverage_log_lik(m, self.K, self.alpha)
        if not math.isfinite(ll_free):
            return math.nan, -math.inf, False
        ind = self._segment_indicator(j)
        a = self.alpha
        p = np.where(ind > 0, (1.0 - a) / m, a / (self.K - m))
        theta_star = float(np.sum(p * self.slope * self.mid) / np.sum(p * self.slope))
        lo, hi = self._segment_bounds(j)
        if lo < theta_star < hi:
            return theta_star, float(ll_free), True
        edge = lo if theta_star <= lo else hi
        return edge, self._segment_log_lik(j, edge, ind), False

    # -- profile maximum ---------------------------------------------------

    def _profile_max(self) -> ProfileMax:
        if self.variant in (Variant.RE, Variant.SYMMETRY):
            theta_hat = float(np.sum(self.slope * self.mid) / np.sum(self.slope))
            return ProfileMax(theta_hat, -self.K * math.log(self.K))
        if self.variant is Variant.INDICATOR:
            return self._profile_indicator()
        return self._profile_both()

    def _profile_indicator(self) -> ProfileMax:
        seg_ll = coverage_log_lik(self.segment_counts, self.K, self.alpha)
        pt_ll = coverage_log_lik(self.point_counts, self.K, self.alpha)
        best = max(seg_ll.max(), pt_ll.max())
        if not math.isfinite(best):
            raise NoFeasibleTheta("no theta has coverage count strictly between 0 and K")
        seg_best = np.flatnonzero(seg_ll == best)
        if seg_best.size:
            widths = [np.diff(self._segment_bounds(j))[0] for j in seg_best]
            j = int(seg_best[int(np.argmax(widths))])
            lo, hi = self._segment_bounds(j)
            theta_hat = 0.5 * (lo + hi)
            where = {"piece": "segment", "bounds": [lo, hi]}
        else:
            i = int(np.flatnonzero(pt_ll == best)[0])
            theta_hat = float(self.breakpoints[i])
            where = {"piece": "point"}
        m_hat = int(round(self.indicator(theta_hat).sum()))
        return ProfileMax(theta_hat, float(best), True, {"m_hat": m_hat, **where})

    def _profile_both(self) -> ProfileMax:
        # Candidates are open segments and breakpoints. The coverage-only
        # likelihood bounds each candidate from above, so candidates are
        # visited in decreasing bound order and the scan stops once no
        # remaining bound can beat the incumbent.
        seg_bound = coverage_log_lik(self.segment_counts, self.K, self.alpha)
        pt_bound = coverage_log_lik(self.point_counts, self.K, self.alpha)
        n = self.breakpoints.size
        bounds = np.concatenate([seg_bound, pt_bound])
        order = np.argsort(-bounds, kind="stable")
        best = (-math.inf, math.nan, False, None)
        visited = 0
        for idx in order:
            if not bounds[idx] > best[0]:
                break
            visited += 1
            if idx <= n:
                theta, ll, attained = self._segment_peak(int(idx))
                piece = ("segment", int(idx))
            else:
                theta = float(self.breakpoints[idx - n - 1])
                ll = self.log_lik(theta)
                attained = True
                piece = ("point", int(idx - n - 1))
            if ll > best[0]:
                best = (ll, theta, attained, piece)
        ll, theta, attained, piece = best
        if not math.isfinite(ll):
            raise NoFeasibleTheta("no theta gives a feasible EL3 constraint set")
        diag = {"piece": piece[0], "candidates_visited": visited}
        if not attained:
            # Supremum is a one-sided limit at a segment edge: report a point
            # just inside the segment.
            lo, hi = self._segment_bounds(piece[1])
            nudge = 1e-10 * (hi - lo)
            theta = theta + nudge if theta == lo else theta - nudge
            diag["limit_at_edge"] = True
        return ProfileMax(float(theta), float(ll), attained, diag)

    # -- confidence sets ---------------------------------------------------

    def confidence_interval(self, beta: float, *, full_level_set: bool = False) -> AnalysisResult:
        """Invert ``-2 log R(theta) <= chi2_{1-beta}(r)``.

        Returns the connected component of the confidence set that contains
        the point estimate. For the indicator-based variants the set can be
        a union of several intervals; when ``full_level_set`` is true (always
        for EL1, which is cheap) the complete set is stored under
        ``diagnostics["level_set"]``.
        """
        if not 0.0 < beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {beta}")
        q = chi2_quantile(1.0 - beta, self.r)
        theta_hat = self.profile.theta_hat
        tol = 1e-9 * (1.0 + abs(theta_hat))
        diag: dict[str, Any] = {"threshold": q, "profile": dict(self.profile.diagnostics)}
        if self.variant in (Variant.RE, Variant.SYMMETRY):
            lo, hi = self._ci_smooth(q, tol, diag)
        elif self.variant is Variant.INDICATOR:
            lo, hi = self._ci_indicator(q, diag)
        else:
            lo, hi = self._ci_both(q, tol, diag, full_level_set)
        diag["connected"] = len(diag.get("level_set", [[lo, hi]])) == 1
        return AnalysisResult(self.variant.method, theta_hat, lo, hi, 1.0 - beta, None, diag)

    def _stat(self, theta: float) -> float:
        return self.neg2logR(theta).neg2logR

    def _ci_smooth(self, q, tol, diag):
        theta_hat = self.profile.theta_hat
        lo_edge, hi_edge = float(self.mid.min()), float(self.mid.max())
        diag["feasible_range"] = [lo_edge, hi_edge]
        if lo_edge == hi_edge:
            return theta_hat, theta_hat
        step0 = float(np.median(self.upper - self.lower)) / (2.0 * math.sqrt(self.K))
        evals = [0]

        def stat(t):
            evals[0] += 1
            return self._stat(t)

        ends = []
        for direction, edge in ((-1.0, lo_edge), (1.0, hi_edge)):
            inner, step = theta_hat, step0
            # Expand outward until the statistic exceeds q or we leave the
            # feasible range (where it is infinite).
            while True:
                outer = theta_hat + direction * step
                if direction * (outer - edge) >= 0:
                    outer = edge
                    break
                if stat(outer) > q:
                    break
                inner = outer
                step *= 2.0
            ends.append(_bisect(stat, inner, outer, q, tol))
        diag["evaluations"] = evals[0]
        diag["crossings"] = list(ends)
        return ends[0], ends[1]

    def _ci_indicator(self, q, diag):
        gmax = self.profile.log_lik_max
        n = self.breakpoints.size
        seg_in = -2.0 * (coverage_log_lik(self.segment_counts, self.K, self.alpha) - gmax) <= q
        pt_in = -2.0 * (coverage_log_lik(self.point_counts, self.K, self.alpha) - gmax) <= q
        # Interleave pieces: seg0, pt0, seg1, pt1, ..., pt_{n-1}, seg_n.
        inside = np.empty(2 * n + 1, dtype=bool)
        inside[0::2] = seg_in
        inside[1::2] = pt_in
        pieces = self._piece_extents()
        level_set = _merge_pieces(inside, pieces)
        diag["level_set"] = level_set
        diag["crossings"] = sorted({float(x) for iv in level_set for x in iv})
        theta_hat = self.profile.theta_hat
        for lo, hi in level_set:
            if lo <= theta_hat <= hi:
                return lo, hi
        return theta_hat, theta_hat

    def _piece_extents(self):
        bp = self.breakpoints
        out = []
        for j in range(bp.size + 1):
            out.append(self._segment_bounds(j))
            if j < bp.size:
                out.append((bp[j], bp[j]))
        return out

    def _piece_of(self, theta: float) -> int:
        bp = self.breakpoints
        i = int(np.searchsorted(bp, theta, side="left"))
        if i < bp.size and bp[i] == theta:
            return 2 * i + 1
        return 2 * i

    def _ci_both(self, q, tol, diag, full_level_set):
        gmax = self.profile.log_lik_max
        theta_hat = self.profile.theta_hat
        n = self.breakpoints.size
        seg_bound_ok = -2.0 * (coverage_log_lik(self.segment_counts, self.K, self.alpha) - gmax) <= q
        cache: dict[int, np.ndarray] = {}

        def seg_stat(j, theta):
            if j not in cache:
                cache[j] = self._segment_indicator(j)
            return max(0.0, -2.0 * (self._segment_log_lik(j, theta, cache[j]) - gmax))

        def pt_stat(i):
            return self._stat(float(self.breakpoints[i]))

        crossings = []
        start = self._piece_of(theta_hat)
        ends = []
        for direction in (-1, 1):
            p = start
            bound = None
            if p % 2 == 0:
                j = p // 2
                lo, hi = self._segment_bounds(j)
                edge = lo if direction < 0 else hi
                if seg_stat(j, edge) > q:
                    bound = _bisect(lambda t: seg_stat(j, t), theta_hat, edge, q, tol)
                    crossings.append(bound)
            while bound is None:
                p += direction
                if p % 2 == 1:
                    i = p // 2
                    if pt_stat(i) > q:
                        bound = float(self.breakpoints[i])
                else:
                    j = p // 2
                    lo, hi = self._segment_bounds(j)
                    near, far = (hi, lo) if direction < 0 else (lo, hi)
                    if not seg_bound_ok[j] or seg_stat(j, near) > q:
                        bound = near
                    elif seg_stat(j, far) > q:
                        bound = _bisect(lambda t: seg_stat(j, t), near, far, q, tol)
                        crossings.append(bound)
            ends.append(bound)
        diag["crossings"] = sorted(set(crossings) | set(ends))
        if full_level_set:
            diag["level_set"] = self._level_set_both(q, tol, seg_stat, pt_stat, seg_bound_ok)
        return ends[0], ends[1]

    def _level_set_both(self, q, tol, seg_stat, pt_stat, seg_bound_ok):
        gmax = self.profile.log_lik_max
        n = self.breakpoints.size
        pt_bound_ok = -2.0 * (coverage_log_lik(self.point_counts, self.K, self.alpha) - gmax) <= q
        parts = []
        for j in range(n + 1):
            if seg_bound_ok[j]:
                peak, ll, _ = self._segment_peak(j)
                if math.isfinite(ll) and -2.0 * (ll - gmax) <= q:
                    lo, hi = self._segment_bounds(j)
                    a = lo if seg_stat(j, lo) <= q else _bisect(lambda t: seg_stat(j, t), peak, lo, q, tol)
                    b = hi if seg_stat(j, hi) <= q else _bisect(lambda t: seg_stat(j, t), peak, hi, q, tol)
                    parts.append([a, b])
            if j < n and pt_bound_ok[j] and pt_stat(j) <= q:
                b = float(self.breakpoints[j])
                parts.append([b, b])
        parts.sort()
        merged: list[list[float]] = []
        for a, b in parts:
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        return [[float(a), float(b)] for a, b in merged]


def _merge_pieces(inside: np.ndarray, extents) -> list[list[float]]:
    out: list[list[float]] = []
    prev = False
    for flag, (a, b) in zip(inside, extents):
        if flag:
            if prev:
                out[-1][1] = b
            else:
                out.append([a, b])
        prev = bool(flag)
    return [[float(a), float(b)] for a, b in out]


def _bisect(stat, inner: float, outer: float, q: float, tol: float) -> float:
    """Locate the crossing of ``stat = q`` between ``inner`` (<= q) and ``outer``.

    Returns the last point found inside the set.
    """
    while abs(outer - inner) > tol:
        mid = 0.5 * (inner + outer)
        if mid == inner or mid == outer:
            break
        if stat(mid) <= q:
            inner = mid
        else:
            outer = mid
    return inner


# ---------------------------------------------------------------------------
# Functional interface
# ---------------------------------------------------------------------------

def neg2logR(ef: EstimatingFunction, theta: float) -> ElEvaluation:
    return ef.neg2logR(theta)


def profile_max(ef: EstimatingFunction) -> ProfileMax:
    return ef.profile


def confidence_interval(ef: EstimatingFunction, beta: float, **kw) -> AnalysisResult:
    return ef.confidence_interval(beta, **kw)


def el_analysis(dataset: MetaDataset, variant: Variant | str, beta: float = 0.05,
                **kw) -> AnalysisResult:
    """Point estimate and ``1 - beta`` confidence interval for one EL variant."""
    return EstimatingFunction(dataset, variant).confidence_interval(beta, **kw)
