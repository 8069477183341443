"""Monte-Carlo experiments: coverage, divergence of Z, and Wilks QQ checks.

Every replicate draws from its own Philox stream keyed by
``(seed, experiment, replicate)``, so a replicate's data never depends on
which other replicates ran or in what order.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Iterable, Sequence

import numpy as np
from scipy import stats

from .analysis import run_method
from .classic import WeightedSummaries, dl_tau2
from .el import EstimatingFunction, Variant
from .errors import BadConfig, NumericalError
from .types import LARGE_SAMPLE_N, MetaDataset, Method, critical_value

# Moments of the skewed building blocks.
CHI2_DF = 4
CHI2_MEAN, CHI2_VAR = 4.0, 8.0
LOGNORMAL_MEAN = math.exp(1.5)
LOGNORMAL_VAR = (math.e - 1.0) * math.e ** 3

# Stream tags so different experiment kinds never share random numbers.
_STREAM_COVERAGE = 0
_STREAM_QQ = 1
_STREAM_DIVERGENCE = 2


class Scenario(str, enum.Enum):
    S1 = "S1"  # Gaussian data, Gaussian random effects
    S2 = "S2"  # Gaussian data, log-normal random effects
    S3 = "S3"  # chi2(4) data, Gaussian random effects
    S4 = "S4"  # log-normal data, chi2(4) random effects
    FIXED_CHISQ = "FixedChiSq"  # raw chi2(4) data, fixed effect theta = 4


def replicate_rng(seed: int, replicate: int, stream: int = _STREAM_COVERAGE) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) % 2 ** 64, spawn_key=(stream, int(replicate)))
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_NRULE_RE = re.compile(r"^\s*(\w+)\s*\(([^)]*)\)\s*$")


@dataclass(frozen=True)
class NRule:
    """How per-study sample sizes are drawn.

    ``uniform_scaled(lo, hi, factor)``: ``n = round(factor * U[lo, hi])``.
    ``uniform_k(a, b)``: ``n`` uniform on the integers ``[a K, b K]``.
    ``fixed(n)``: every study has ``n`` observations.
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        arity = {"uniform_scaled": 3, "uniform_k": 2, "fixed": 1}
        if self.kind not in arity:
            raise BadConfig(f"unknown n_rule {self.kind!r}", "n_rule")
        if len(self.params) != arity[self.kind]:
            raise BadConfig(f"n_rule {self.kind} takes {arity[self.kind]} parameters", "n_rule")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.min_n(2) < 2:
            raise BadConfig("n_rule allows sample sizes below 2", "n_rule")

    @classmethod
    def uniform_scaled(cls, lo=100, hi=500, factor=0.2):
        return cls("uniform_scaled", (lo, hi, factor))

    @classmethod
    def uniform_k(cls, a, b):
        return cls("uniform_k", (a, b))

    @classmethod
    def fixed(cls, n):
        return cls("fixed", (n,))

    @classmethod
    def parse(cls, text: str) -> "NRule":
        m = _NRULE_RE.match(text)
        if not m:
            raise BadConfig(f"cannot parse n_rule {text!r}", "n_rule")
        try:
            params = tuple(float(x) for x in m.group(2).split(",") if x.strip())
        except ValueError:
            raise BadConfig(f"non-numeric n_rule parameter in {text!r}", "n_rule") from None
        return cls(m.group(1).lower(), params)

    def __str__(self):
        return f"{self.kind}({', '.join(_fmt_num(p) for p in self.params)})"

    def min_n(self, K: int) -> float:
        if self.kind == "uniform_scaled":
            lo, _, f = self.params
            return math.floor(f * lo + 0.5)
        if self.kind == "uniform_k":
            return math.ceil(self.params[0] * K)
        return self.params[0]

    def draw(self, rng: np.random.Generator, K: int) -> np.ndarray:
        if self.kind == "uniform_scaled":
            lo, hi, f = self.params
            n = np.floor(f * rng.uniform(lo, hi, size=K) + 0.5)
        elif self.kind == "uniform_k":
            a, b = self.params
            n = rng.integers(math.ceil(a * K), math.floor(b * K), size=K, endpoint=True)
        else:
            n = np.full(K, self.params[0])
        return n.astype(np.int64)


def _fmt_num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


@dataclass(frozen=True)
class SimulationConfig:
    scenario: Scenario
    K: int
    tau2: float = 0.0
    theta: float | None = None
    sigma2: float = 1.0
    n_rule: NRule = field(default_factory=NRule.uniform_scaled)
    replicates: int = 1000
    seed: int = 0
    beta: float = 0.05
    level: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        if self.theta is None:
            default = 4.0 if self.scenario is Scenario.FIXED_CHISQ else 0.0
            object.__setattr__(self, "theta", default)
        if isinstance(self.n_rule, str):
            object.__setattr__(self, "n_rule", NRule.parse(self.n_rule))
        if int(self.K) != self.K or self.K < 2:
            raise BadConfig(f"K must be an integer >= 2, got {self.K}", "K")
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise BadConfig(f"replicates must be a positive integer, got {self.replicates}", "replicates")
        if not self.sigma2 > 0:
            raise BadConfig(f"sigma2 must be positive, got {self.sigma2}", "sigma2")
        if not self.tau2 >= 0:
            raise BadConfig(f"tau2 must be nonnegative, got {self.tau2}", "tau2")
        if not 0 < self.beta < 1:
            raise BadConfig(f"beta must lie in (0, 1), got {self.beta}", "beta")
        if not 0 < self.level < 1:
            raise BadConfig(f"level must lie in (0, 1), got {self.level}", "level")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise BadConfig("seed must be a 64-bit unsigned integer", "seed")
        if self.n_rule.min_n(self.K) < 2:
            raise BadConfig("n_rule yields sample sizes below 2", "n_rule")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["scenario"] = self.scenario.value
        d["n_rule"] = {"rule": str(self.n_rule), "kind": self.n_rule.kind,
                       "params": list(self.n_rule.params)}
        return d


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def scaled_chi2(rng: np.random.Generator, size, mean: float | np.ndarray, sd: float) -> np.ndarray:
    """chi2(4) shifted and scaled to the requested mean and standard deviation."""
    scale = sd / math.sqrt(CHI2_VAR)
    return (np.asarray(mean) - CHI2_MEAN * scale) + scale * rng.chisquare(CHI2_DF, size)


def scaled_lognormal(rng: np.random.Generator, size, mean: float | np.ndarray, sd: float) -> np.ndarray:
    """exp(N(1, 1)) shifted and scaled to the requested mean and standard deviation."""
    scale = sd / math.sqrt(LOGNORMAL_VAR)
    return (np.asarray(mean) - LOGNORMAL_MEAN * scale) + scale * rng.lognormal(1.0, 1.0, size)


def draw_study_effects(config: SimulationConfig, rng: np.random.Generator) -> np.ndarray:
    K, tau = config.K, math.sqrt(config.tau2)
    sc = config.scenario
    if sc is Scenario.FIXED_CHISQ or tau == 0:
        return np.full(K, float(config.theta))
    if sc in (Scenario.S1, Scenario.S3):
        return config.theta + tau * rng.standard_normal(K)
    if sc is Scenario.S2:
        return scaled_lognormal(rng, K, config.theta, tau)
    return scaled_chi2(rng, K, config.theta, tau)


def draw_observations(config: SimulationConfig, rng: np.random.Generator,
                      theta_i: np.ndarray, n: np.ndarray) -> np.ndarray:
    """All y_ij concatenated study by study."""
    total = int(n.sum())
    means = np.repeat(theta_i, n)
    sd = math.sqrt(config.sigma2)
    sc = config.scenario
    if sc in (Scenario.S1, Scenario.S2):
        return means + sd * rng.standard_normal(total)
    if sc is Scenario.S3:
        return scaled_chi2(rng, total, means, sd)
    if sc is Scenario.S4:
        return scaled_lognormal(rng, total, means, sd)
    # raw chi2(4) around theta: mean theta, variance 8
    return means - CHI2_MEAN + rng.chisquare(CHI2_DF, total)


def study_summaries(y: np.ndarray, n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-study means and squared standard errors ``sum (y - Y)^2 / (n (n - 1))``."""
    idx = np.repeat(np.arange(n.size), n)
    means = np.bincount(idx, weights=y, minlength=n.size) / n
    ss = np.bincount(idx, weights=(y - means[idx]) ** 2, minlength=n.size)
    return means, ss / (n * (n - 1.0))


def intervals_from_summaries(means, se2, n, level=0.95):
    """Symmetric z (n >= 30) or t (n < 30) intervals."""
    crit = np.empty(len(n))
    z = critical_value(level, None)
    for i, ni in enumerate(n):
        crit[i] = z if ni >= LARGE_SAMPLE_N else critical_value(level, int(ni))
    half = crit * np.sqrt(se2)
    return means - half, means + half


def gen_dataset(config: SimulationConfig, rng: np.random.Generator) -> MetaDataset:
    n = config.n_rule.draw(rng, config.K)
    theta_i = draw_study_effects(config, rng)
    y = draw_observations(config, rng, theta_i, n)
    means, se2 = study_summaries(y, n)
    lo, hi = intervals_from_summaries(means, se2, n, config.level)
    return MetaDataset.from_arrays(lo, hi, config.level, n)


# ---------------------------------------------------------------------------
# Coverage
# ---------------------------------------------------------------------------

@dataclass
class MethodSummary:
    coverage: float
    mean_width: float
    covered: int
    failures: int
    replicates: int


@dataclass
class ExperimentResult:
    config: SimulationConfig
    methods: dict[str, MethodSummary] = field(default_factory=dict)
    records: list[dict[str, Any]] | None = None
    qq_samples: dict[str, np.ndarray] | None = None
    ks: dict[str, float] | None = None

    @property
    def coverage(self) -> dict[str, float]:
        return {m: s.coverage for m, s in self.methods.items()}


def _coverage_replicate(config: SimulationConfig, methods: Sequence[Method], rep: int):
    rng = replicate_rng(config.seed, rep, _STREAM_COVERAGE)
    data = gen_dataset(config, rng)
    summaries = WeightedSummaries.from_dataset(data)
    out = []
    for m in methods:
        try:
            res = run_method(data, m, config.beta, summaries=summaries)
        except NumericalError as exc:
            out.append((m, None, type(exc).__name__))
            continue
        out.append((m, res, None))
    return out


def run_coverage(config: SimulationConfig, methods: Iterable[Method | str],
                 keep_records: bool = False) -> ExperimentResult:
    """Coverage of the true overall effect by each method's interval.

    A method that fails on a replicate counts as not covering.
    """
    methods = [m if isinstance(m, Method) else Method.parse(m) for m in methods]
    if not methods:
        raise BadConfig("no methods requested", "methods")
    covered = {m: 0 for m in methods}
    failures = {m: 0 for m in methods}
    widths: dict[Method, list[float]] = {m: [] for m in methods}
    records = [] if keep_records else None
    for rep in range(config.replicates):
        for m, res, err in _coverage_replicate(config, methods, rep):
            if res is None:
                failures[m] += 1
                hit = False
            else:
                hit = res.covers(config.theta)
                covered[m] += hit
                widths[m].append(res.width)
            if records is not None:
                records.append({
                    "replicate": rep, "method": m.value,
                    "estimate": None if res is None else res.estimate,
                    "ci_lower": None if res is None else res.ci_lower,
                    "ci_upper": None if res is None else res.ci_upper,
                    "covered": hit, "error": err,
                })
    R = config.replicates
    summary = {
        m.value: MethodSummary(
            coverage=covered[m] / R,
            mean_width=float(np.mean(widths[m])) if widths[m] else math.nan,
            covered=covered[m], failures=failures[m], replicates=R,
        )
        for m in methods
    }
    return ExperimentResult(config, summary, records)


# ---------------------------------------------------------------------------
# Divergence of the Gaussian combined statistic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DivergenceRow:
    K: int
    n: int
    mean_z: float
    se_z: float
    mean_z_tau0: float


def divergence_replicate(K: int, n: int, rng: np.random.Generator,
                         control: bool = False) -> tuple[float, float]:
    """One draw of ``Z = K^{-1/2} sum (theta - Y_i) / s_i`` with theta = 0.

    ``theta_i ~ N(0, 1)`` and ``y_ij = theta_i + chi2(4) - 4``; with
    ``control`` the chi2 noise is replaced by Gaussian noise of the same
    variance. Returns ``Z`` with ``s_i^2 = se_i^2 + tau2_DL`` and with
    ``s_i^2 = se_i^2``.
    """
    theta_i = rng.standard_normal(K)
    if control:
        noise = math.sqrt(CHI2_VAR) * rng.standard_normal((K, n))
    else:
        noise = rng.chisquare(CHI2_DF, (K, n)) - CHI2_MEAN
    y = theta_i[:, None] + noise
    means = y.mean(axis=1)
    se2 = y.var(axis=1, ddof=1) / n
    tau2 = dl_tau2(WeightedSummaries(means, np.sqrt(se2)))
    z = np.sum(-means / np.sqrt(se2 + tau2)) / math.sqrt(K)
    z0 = np.sum(-means / np.sqrt(se2)) / math.sqrt(K)
    return float(z), float(z0)


def run_divergence(K_list: Sequence[int], n_list: Sequence[int], replicates: int,
                   seed: int, control: bool = False) -> list[DivergenceRow]:
    if not K_list or not n_list:
        raise BadConfig("K and n lists must be non-empty")
    if replicates < 1:
        raise BadConfig("replicates must be positive", "replicates")
    rows = []
    for K in K_list:
        for n in n_list:
            if K < 2 or n < 2:
                raise BadConfig(f"need K >= 2 and n >= 2, got K={K}, n={n}")
            # Key the stream by the grid cell so cells can run in any order.
            cell = (int(K) << 20) | int(n)
            zs = np.empty(replicates)
            z0s = np.empty(replicates)
            for rep in range(replicates):
                ss = np.random.SeedSequence(int(seed) % 2 ** 64,
                                            spawn_key=(_STREAM_DIVERGENCE, cell, int(control), rep))
                rng = np.random.Generator(np.random.Philox(ss))
                zs[rep], z0s[rep] = divergence_replicate(int(K), int(n), rng, control)
            se = float(zs.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else math.nan
            rows.append(DivergenceRow(int(K), int(n), float(zs.mean()), se, float(z0s.mean())))
    return rows


# ---------------------------------------------------------------------------
# Wilks calibration (QQ)
# ---------------------------------------------------------------------------

def run_qq(config: SimulationConfig, variants: Iterable[Variant | str] = ("EL1", "EL2", "EL3")) -> ExperimentResult:
    """Sample ``-2 log R(theta0)`` under fixed-effect chi2(4) data.

    All variants are evaluated on the same replicate datasets.
    """
    if config.scenario is not Scenario.FIXED_CHISQ:
        raise BadConfig("QQ study requires scenario FixedChiSq", "scenario")
    variants = [Variant(v) for v in variants]
    samples = {v.value: np.empty(config.replicates) for v in variants}
    for rep in range(config.replicates):
        rng = replicate_rng(config.seed, rep, _STREAM_QQ)
        data = gen_dataset(config, rng)
        for v in variants:
            try:
                ef = EstimatingFunction(data, v)
                samples[v.value][rep] = ef.neg2logR(config.theta).neg2logR
            except NumericalError:
                samples[v.value][rep] = math.inf
    ks = {v.value: ks_distance(samples[v.value], v.dim) for v in variants}
    return ExperimentResult(config, {}, None, samples, ks)


def ks_distance(samples: np.ndarray, df: int) -> float:
    return float(stats.kstest(np.asarray(samples, dtype=float), "chi2", args=(df,)).statistic)


def qq_pairs(samples: np.ndarray, df: int) -> tuple[np.ndarray, np.ndarray]:
    """Sorted samples against chi2(df) quantiles at plotting positions (i - 0.5) / R."""
    s = np.sort(np.asarray(samples, dtype=float))
    probs = (np.arange(1, s.size + 1) - 0.5) / s.size
    return s, stats.chi2.ppf(probs, df)


def with_overrides(config: SimulationConfig, **kw) -> SimulationConfig:
    return replace(config, **kw)
