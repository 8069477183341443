"""Distribution quantiles used across the package.

Thin wrappers over ``scipy.special`` so every module asks for quantiles
the same way and argument checking happens in one place.
"""

import math

from scipy import special


def normal_quantile(p: float) -> float:
    """Standard Gaussian quantile ``Phi^{-1}(p)``."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p!r}")
    return float(special.ndtri(p))


def normal_cdf(x):
    return special.ndtr(x)


def t_quantile(p: float, df: float) -> float:
    """Student-t quantile with ``df`` degrees of freedom."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p!r}")
    if df <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {df!r}")
    return float(special.stdtrit(df, p))


def chi2_quantile(p: float, df: float) -> float:
    """Chi-square quantile, i.e. the ``p`` point of ``chi2(df)``."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p!r}")
    # chi2(df) is Gamma(df/2, scale=2)
    return 2.0 * float(special.gammaincinv(df / 2.0, p))


def chi2_cdf(x, df: float):
    return special.chdtr(df, x)


def two_sided_critical(level: float, df: int | None = None) -> float:
    """Critical value ``c`` such that ``[-c, c]`` has coverage ``level``.

    Uses the t distribution with ``df`` degrees of freedom when given,
    the standard Gaussian otherwise.
    """
    p = 0.5 + 0.5 * level
    if df is None:
        return normal_quantile(p)
    return t_quantile(p, df)

