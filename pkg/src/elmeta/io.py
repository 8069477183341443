"""Reading and writing datasets, results and experiment configuration.

CSV files are comma separated UTF-8 with a mandatory header row. JSON
datasets mirror the CSV columns, either as a bare list of records or as
``{"scale": ..., "studies": [...]}``. Floats are written with 17
significant digits so a write/read cycle is lossless.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import BadConfig, ParseError, ValidationError
from .simulation import NRule, Scenario, SimulationConfig
from .types import ALL_METHODS, AnalysisResult, MetaDataset, Method, Scale, StudyInterval

OUTPUT_DIR_ENV = "ELMETA_OUTPUT_DIR"

DATASET_COLUMNS = ("label", "lower", "upper", "level", "n")
_KNOWN_COLUMNS = set(DATASET_COLUMNS) | {"scale"}


def fmt(x) -> str:
    """Full-precision text for a number; empty for ``None``."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def output_dir(explicit: str | os.PathLike | None = None) -> Path:
    """Explicit directory, else ``$ELMETA_OUTPUT_DIR``, else the working directory."""
    if explicit:
        return Path(explicit)
    return Path(os.environ.get(OUTPUT_DIR_ENV) or ".")


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

def _infer_format(path: Path, fmt_name: str | None) -> str:
    if fmt_name:
        fmt_name = fmt_name.lower()
        if fmt_name not in ("csv", "json"):
            raise ValidationError(f"unknown dataset format {fmt_name!r}")
        return fmt_name
    return "json" if path.suffix.lower() == ".json" else "csv"


def _number(rec: dict, key: str, row: int, required: bool = True):
    raw = rec.get(key)
    if raw is None or (isinstance(raw, str) and not raw.strip()):
        if required:
            raise ParseError(row, f"missing value for {key!r}")
        return None
    try:
        val = float(raw)
    except (TypeError, ValueError):
        raise ParseError(row, f"{key}={raw!r} is not a number") from None
    if not math.isfinite(val):
        raise ParseError(row, f"{key}={raw!r} is not finite")
    return val


def _record_to_study(rec: dict, row: int, input_ratio: bool) -> StudyInterval:
    unknown = set(rec) - _KNOWN_COLUMNS
    if unknown:
        raise ParseError(row, f"unknown field(s) {sorted(unknown)}")
    lower = _number(rec, "lower", row)
    upper = _number(rec, "upper", row)
    level = _number(rec, "level", row, required=False)
    n = _number(rec, "n", row, required=False)
    if input_ratio:
        if lower <= 0 or upper <= 0:
            raise ParseError(row, "ratio-scale bounds must be positive")
        lower, upper = math.log(lower), math.log(upper)
    label = rec.get("label")
    label = f"study{row}" if label is None or str(label) == "" else str(label)
    if n is not None and n != int(n):
        raise ParseError(row, f"n={n!r} is not an integer")
    try:
        return StudyInterval(lower, upper, 0.95 if level is None else level,
                             None if n is None else int(n), label)
    except ValidationError as exc:
        raise ParseError(row, str(exc)) from None


def _read_records(path: Path, kind: str) -> tuple[list[dict], str | None]:
    if kind == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ParseError(0, "empty file, header row required")
            header = [h.strip() for h in reader.fieldnames]
            if not {"lower", "upper"} <= set(header):
                raise ParseError(0, "header must name 'lower' and 'upper' columns")
            reader.fieldnames = header
            records = []
            for row in reader:
                if None in row:
                    raise ParseError(len(records) + 1, "more fields than header columns")
                records.append({k: v for k, v in row.items() if k is not None})
        scales = {r.pop("scale").strip() for r in records if r.get("scale") not in (None, "")}
        for r in records:
            r.pop("scale", None)
        if len(scales) > 1:
            raise ParseError(0, f"rows disagree on scale: {sorted(scales)}")
        return records, scales.pop() if scales else None
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(0, f"invalid JSON: {exc}") from None
    file_scale = None
    if isinstance(doc, dict):
        file_scale = doc.get("scale")
        doc = doc.get("studies")
    if not isinstance(doc, list) or not all(isinstance(r, dict) for r in doc):
        raise ParseError(0, "JSON dataset must be a list of study objects")
    return [dict(r) for r in doc], file_scale


def read_dataset(path: str | os.PathLike, format: str | None = None,
                 scale: Scale | str | None = None, input_ratio: bool = False) -> MetaDataset:
    """Load and validate a dataset.

    Parameters
    ----------
    path : path-like
        CSV or JSON file. The format follows the suffix unless given.
    format : {"csv", "json"}, optional
    scale : {"linear", "log"}, optional
        Overrides any scale recorded in the file; the default is the file's
        scale or ``linear``.
    input_ratio : bool
        Bounds are ratios; take natural logs. Only allowed with log scale.

    Raises
    ------
    ParseError
        For malformed rows, with the 1-based data row number (0 for
        file-level problems).
    ValidationError
        For dataset-level problems such as fewer than two studies.
    """
    path = Path(path)
    kind = _infer_format(path, format)
    records, file_scale = _read_records(path, kind)
    try:
        scale = Scale(scale or file_scale or Scale.LINEAR)
    except ValueError:
        raise ValidationError(f"unknown scale {scale or file_scale!r}") from None
    if input_ratio and scale is not Scale.LOG:
        raise ValidationError("input_ratio requires scale 'log'")
    studies = tuple(_record_to_study(rec, i + 1, input_ratio) for i, rec in enumerate(records))
    return MetaDataset(studies, scale)


def _study_record(s: StudyInterval) -> dict[str, Any]:
    return {"label": s.label, "lower": s.lower, "upper": s.upper,
            "level": s.level, "n": s.sample_size}


def write_dataset(dataset: MetaDataset, path: str | os.PathLike, format: str | None = None) -> None:
    path = Path(path)
    kind = _infer_format(path, format)
    if kind == "json":
        doc = {"scale": dataset.scale.value,
               "studies": [_study_record(s) for s in dataset.studies]}
        path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        return
    rows = [[s.label, fmt(s.lower), fmt(s.upper), fmt(s.level), fmt(s.sample_size),
             dataset.scale.value] for s in dataset.studies]
    write_csv(path, list(DATASET_COLUMNS) + ["scale"], rows)


def write_csv(path: str | os.PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write rows with a header; numbers are formatted with :func:`fmt`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


# ---------------------------------------------------------------------------
# Analysis results
# ---------------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if hasattr(x, "value") and isinstance(x.value, str):
        return x.value
    return x


def results_document(rows: Sequence[tuple[Method, AnalysisResult | None, str | None]],
                     **meta) -> dict[str, Any]:
    """JSON-ready document for ``analyze`` output triples."""
    out = []
    for method, res, err in rows:
        if res is None:
            out.append({"method": method.value, "status": "error", "error": err})
        else:
            d = res.to_dict()
            d["status"] = "ok"
            out.append(d)
    return _jsonable({**meta, "results": out})


def format_table(rows: Sequence[tuple[Method, AnalysisResult | None, str | None]],
                 digits: int = 6) -> str:
    """Aligned plain-text table of analysis results."""
    header = ("method", "estimate", "ci_lower", "ci_upper", "tau2", "note")
    body = []
    for method, res, err in rows:
        if res is None:
            body.append((method.value, "-", "-", "-", "-", err or "failed"))
            continue
        note = "" if res.diagnostics.get("connected", True) else "disconnected set"
        tau2 = "-" if res.tau2 is None else f"{res.tau2:.{digits}g}"
        body.append((method.value, f"{res.estimate:.{digits}g}", f"{res.ci_lower:.{digits}g}",
                     f"{res.ci_upper:.{digits}g}", tau2, note))
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) if i in (0, 5) else c.rjust(w)
                       for i, (c, w) in enumerate(zip(r, widths))).rstrip()
             for r in [header, *body]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Experiment configuration
# ---------------------------------------------------------------------------

CONFIG_KEYS = ("scenario", "theta", "sigma2", "tau2_list", "K_list", "n_rule",
               "replicates", "seed", "beta", "methods", "out_dir")


@dataclass(frozen=True)
class RunConfig:
    """A grid of coverage experiments sharing everything but ``(K, tau2)``."""

    scenario: Scenario
    K_list: tuple[int, ...]
    tau2_list: tuple[float, ...] = (0.0,)
    theta: float | None = None
    sigma2: float = 1.0
    n_rule: NRule = field(default_factory=NRule.uniform_scaled)
    replicates: int = 1000
    seed: int = 0
    beta: float = 0.05
    methods: tuple[Method, ...] = ALL_METHODS
    out_dir: str | None = None

    def cells(self) -> list[SimulationConfig]:
        return [SimulationConfig(self.scenario, K, tau2, self.theta, self.sigma2, self.n_rule,
                                 self.replicates, self.seed, self.beta)
                for K in self.K_list for tau2 in self.tau2_list]

    def to_dict(self) -> dict[str, Any]:
        theta = self.cells()[0].theta
        return {
            "scenario": self.scenario.value,
            "theta": theta,
            "sigma2": self.sigma2,
            "tau2_list": list(self.tau2_list),
            "K_list": list(self.K_list),
            "n_rule": {"rule": str(self.n_rule), "kind": self.n_rule.kind,
                       "params": list(self.n_rule.params)},
            "replicates": self.replicates,
            "seed": self.seed,
            "beta": self.beta,
            "methods": [m.value for m in self.methods],
        }


def _parse_value(key: str, text: str):
    def floats():
        return tuple(float(v) for v in text.split(",") if v.strip())

    def ints():
        vals = floats()
        if any(v != int(v) for v in vals):
            raise ValueError("expected integers")
        return tuple(int(v) for v in vals)

    if key == "scenario":
        return Scenario(text)
    if key in ("theta", "sigma2", "beta"):
        return float(text)
    if key in ("replicates", "seed"):
        (v,) = ints()
        return v
    if key == "tau2_list":
        return floats()
    if key == "K_list":
        return ints()
    if key == "n_rule":
        return NRule.parse(text)
    if key == "methods":
        if text.strip().lower() == "all":
            return ALL_METHODS
        return tuple(Method.parse(m) for m in text.split(",") if m.strip())
    return text


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Lists are comma separated. ``scenario`` and ``K_list`` are required.
    """
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BadConfig(f"line {lineno}: expected key = value", None)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise BadConfig(f"line {lineno}: unknown key {key!r}", key)
        if key in values:
            raise BadConfig(f"line {lineno}: duplicate key {key!r}", key)
        try:
            values[key] = _parse_value(key, val)
        except BadConfig as exc:
            raise BadConfig(f"line {lineno}: {exc}", key) from None
        except (TypeError, ValueError) as exc:
            raise BadConfig(f"line {lineno}: bad value for {key!r}: {val!r} ({exc})", key) from None
    for key in ("scenario", "K_list"):
        if key not in values:
            raise BadConfig(f"missing required key {key!r}", key)
    for key in ("K_list", "tau2_list", "methods"):
        if key in values and not values[key]:
            raise BadConfig(f"{key} is empty", key)
    cfg = RunConfig(**values)
    cfg.cells()  # validate every cell up front
    return cfg


def read_config(path: str | os.PathLike) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))
