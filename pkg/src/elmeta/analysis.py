"""Run any of the nine meta-analysis methods on a dataset."""

from __future__ import annotations

import math
from typing import Iterable

from .classic import WeightedSummaries, cd_ci, conventional_ci, estimate_tau2
from .el import EstimatingFunction, Variant
from .errors import NumericalError
from .types import ALL_METHODS, AnalysisResult, MetaDataset, Method

_EL_VARIANTS = {
    Method.EL_RE: Variant.RE,
    Method.EL1: Variant.INDICATOR,
    Method.EL2: Variant.SYMMETRY,
    Method.EL3: Variant.BOTH,
}

# Default tau^2 estimator per method; CD pairs with DL, conventional RE
# comes in both flavours.
_TAU2 = {
    Method.CONVENTIONAL_FE: None,
    Method.CONVENTIONAL_RE_DL: "DL",
    Method.CONVENTIONAL_RE_REML: "REML",
    Method.CD_FE: None,
    Method.CD_RE: "DL",
}


def run_method(dataset: MetaDataset, method: Method | str, beta: float = 0.05, *,
               cd_tau2: str = "DL", full_level_set: bool = False,
               summaries: WeightedSummaries | None = None) -> AnalysisResult:
    """Estimate and ``1 - beta`` interval for ``method``.

    ``summaries`` lets callers reuse recovered centers/sds across methods.
    """
    method = Method(method) if not isinstance(method, Method) else method
    if method in _EL_VARIANTS:
        ef = EstimatingFunction(dataset, _EL_VARIANTS[method])
        return ef.confidence_interval(beta, full_level_set=full_level_set)
    if summaries is None:
        summaries = WeightedSummaries.from_dataset(dataset)
    estimator = cd_tau2 if method is Method.CD_RE else _TAU2[method]
    tau2 = 0.0 if estimator is None else estimate_tau2(summaries, estimator)
    ws = summaries.with_tau2(tau2)
    if method in (Method.CD_FE, Method.CD_RE):
        res = cd_ci(ws, beta, method)
    else:
        res = conventional_ci(ws, beta, method)
    if estimator is not None:
        res.diagnostics["tau2_estimator"] = estimator
    return res


def analyze(dataset: MetaDataset, methods: Iterable[Method | str] = ALL_METHODS,
            beta: float = 0.05, **kw) -> list[tuple[Method, AnalysisResult | None, str | None]]:
    """Run several methods; numerical failures are reported, not raised.

    Returns ``(method, result, error)`` triples in the canonical method order.
    """
    wanted = {Method.parse(m) if isinstance(m, str) else Method(m) for m in methods}
    summaries = WeightedSummaries.from_dataset(dataset)
    out = []
    for method in ALL_METHODS:
        if method not in wanted:
            continue
        try:
            out.append((method, run_method(dataset, method, beta, summaries=summaries, **kw), None))
        except NumericalError as exc:
            out.append((method, None, f"{type(exc).__name__}: {exc}"))
    return out


def to_ratio_scale(result: AnalysisResult) -> AnalysisResult:
    """Exponentiate estimate and endpoints of a log-scale result."""
    diag = dict(result.diagnostics)
    diag["reported_scale"] = "ratio"
    return AnalysisResult(result.method, math.exp(result.estimate), math.exp(result.ci_lower),
                          math.exp(result.ci_upper), result.ci_level, result.tau2, diag)
