"""Shared data model: study intervals, datasets and analysis results."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable

import numpy as np

from .errors import (
    BadLevel,
    BadSampleSize,
    DegenerateInterval,
    EmptyDataset,
    MixedLevels,
    TooFewStudies,
    ValidationError,
)
from .quantiles import two_sided_critical

# Sample sizes below this use the t quantile with n - 1 degrees of freedom.
LARGE_SAMPLE_N = 30


class Scale(str, enum.Enum):
    LINEAR = "linear"
    LOG = "log"


class Method(str, enum.Enum):
    CONVENTIONAL_FE = "Conventional-FE"
    CONVENTIONAL_RE_DL = "Conventional-RE-DL"
    CONVENTIONAL_RE_REML = "Conventional-RE-REML"
    CD_FE = "CD-FE"
    CD_RE = "CD-RE"
    EL_RE = "EL-RE"
    EL1 = "EL1"
    EL2 = "EL2"
    EL3 = "EL3"

    @classmethod
    def parse(cls, name: str) -> "Method":
        key = name.strip().lower()
        for m in cls:
            if m.value.lower() == key or m.name.lower() == key:
                return m
        raise ValueError(f"unknown method {name!r}; choose from {[m.value for m in cls]}")


ALL_METHODS = tuple(Method)


@dataclass(frozen=True)
class StudyInterval:
    """One study's reported ``level`` confidence interval ``[lower, upper]``."""

    lower: float
    upper: float
    level: float = 0.95
    sample_size: int | None = None
    label: str = ""

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValidationError(f"non-finite interval bounds ({lo}, {hi})")
        if not lo < hi:
            raise DegenerateInterval(f"lower ({lo}) must be strictly below upper ({hi})")
        if not 0.0 < float(self.level) < 1.0:
            raise BadLevel(f"level must lie in (0, 1), got {self.level}")
        if self.sample_size is not None:
            n = int(self.sample_size)
            if n != self.sample_size or n < 2:
                raise BadSampleSize(f"sample size must be an integer >= 2, got {self.sample_size}")
            object.__setattr__(self, "sample_size", n)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "level", float(self.level))

    @property
    def alpha(self) -> float:
        return 1.0 - self.level


@dataclass(frozen=True)
class MetaDataset:
    """An ordered collection of study intervals sharing one confidence level."""

    studies: tuple[StudyInterval, ...]
    scale: Scale = Scale.LINEAR

    def __post_init__(self):
        studies = tuple(self.studies)
        if not studies:
            raise EmptyDataset("dataset has no studies")
        if len(studies) < 2:
            raise TooFewStudies(f"need at least 2 studies, got {len(studies)}")
        levels = {s.level for s in studies}
        if len(levels) > 1:
            raise MixedLevels(f"studies report different levels: {sorted(levels)}")
        object.__setattr__(self, "studies", studies)
        object.__setattr__(self, "scale", Scale(self.scale))

    @classmethod
    def from_arrays(cls, lower, upper, level=0.95, sample_sizes=None, labels=None,
                    scale=Scale.LINEAR) -> "MetaDataset":
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        k = lower.shape[0]
        if labels is None:
            labels = [f"study{i + 1}" for i in range(k)]
        if sample_sizes is None:
            sample_sizes = [None] * k
        ns = [None if n is None else int(n) for n in sample_sizes]
        studies = tuple(
            StudyInterval(lo, hi, level, n, lab)
            for lo, hi, n, lab in zip(lower.tolist(), upper.tolist(), ns, labels)
        )
        return cls(studies, scale)

    def __len__(self):
        return len(self.studies)

    @property
    def K(self) -> int:
        return len(self.studies)

    @property
    def common_level(self) -> float:
        return self.studies[0].level

    @property
    def alpha(self) -> float:
        return 1.0 - self.common_level

    @cached_property
    def lower(self) -> np.ndarray:
        a = np.array([s.lower for s in self.studies])
        a.flags.writeable = False
        return a

    @cached_property
    def upper(self) -> np.ndarray:
        a = np.array([s.upper for s in self.studies])
        a.flags.writeable = False
        return a

    @property
    def sample_sizes(self) -> list[int | None]:
        return [s.sample_size for s in self.studies]


@dataclass(frozen=True)
class RecoveredSummary:
    """Effect estimate and standard error backed out of a symmetric interval."""

    center: float
    sd: float

    def __post_init__(self):
        if not self.sd > 0:
            raise ValidationError(f"sd must be positive, got {self.sd}")


@dataclass(frozen=True)
class AnalysisResult:
    method: Method
    estimate: float
    ci_lower: float
    ci_upper: float
    ci_level: float
    tau2: float | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        for name in ("estimate", "ci_lower", "ci_upper", "ci_level"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.tau2 is not None:
            object.__setattr__(self, "tau2", float(self.tau2))
        vals = (self.ci_lower, self.estimate, self.ci_upper)
        if all(math.isfinite(v) for v in vals) and not (
            self.ci_lower <= self.estimate <= self.ci_upper
        ):
            raise ValidationError(
                f"{self.method.value}: estimate {self.estimate} outside "
                f"[{self.ci_lower}, {self.ci_upper}]"
            )
        if self.tau2 is not None and self.tau2 < 0:
            raise ValidationError(f"tau2 must be nonnegative, got {self.tau2}")

    def covers(self, theta: float) -> bool:
        return self.ci_lower <= theta <= self.ci_upper

    @property
    def width(self) -> float:
        return self.ci_upper - self.ci_lower

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method.value,
            "estimate": self.estimate,
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
            "ci_level": self.ci_level,
            "tau2": self.tau2,
            "diagnostics": self.diagnostics,
        }


def _coerce_study(item, index: int) -> StudyInterval:
    if isinstance(item, StudyInterval):
        return item
    if isinstance(item, dict):
        return StudyInterval(**item)
    item = tuple(item)
    if len(item) < 2:
        raise ValidationError(f"study {index}: expected (lower, upper[, level[, n[, label]]])")
    return StudyInterval(*item)


def validate_dataset(raw: Iterable, scale: Scale | str = Scale.LINEAR) -> MetaDataset:
    """Check raw study records and wrap them in a :class:`MetaDataset`.

    ``raw`` may hold :class:`StudyInterval` objects, tuples
    ``(lower, upper[, level[, n[, label]]])`` or dicts of the same fields.
    Order is preserved.
    """
    raw = list(raw)
    if not raw:
        raise EmptyDataset("dataset has no studies")
    studies = tuple(_coerce_study(item, i) for i, item in enumerate(raw))
    return MetaDataset(studies, Scale(scale))


def critical_value(level: float, sample_size: int | None) -> float:
    """Two-sided critical value used to build a study interval.

    Gaussian for large or unknown samples, t with ``n - 1`` degrees of
    freedom when ``n < 30``.
    """
    if sample_size is not None and sample_size < LARGE_SAMPLE_N:
        return two_sided_critical(level, sample_size - 1)
    return two_sided_critical(level)


def build_interval(center: float, sd: float, level: float = 0.95,
                   sample_size: int | None = None, label: str = "") -> StudyInterval:
    c = critical_value(level, sample_size)
    return StudyInterval(center - c * sd, center + c * sd, level, sample_size, label)


def recover_summary(s: StudyInterval) -> RecoveredSummary:
    """Invert the symmetric interval construction to get ``(center, sd)``."""
    center = (s.lower + s.upper) / 2.0
    sd = (s.upper - s.lower) / (2.0 * critical_value(s.level, s.sample_size))
    return RecoveredSummary(center, sd)


def recover_arrays(dataset: MetaDataset) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`recover_summary` over a whole dataset."""
    level = dataset.common_level
    crit = np.array([critical_value(level, n) for n in dataset.sample_sizes])
    centers = (dataset.lower + dataset.upper) / 2.0
    sds = (dataset.upper - dataset.lower) / (2.0 * crit)
    return centers, sds

