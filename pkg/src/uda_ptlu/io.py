"""Class-file (de)serialization and deterministic JSON/CSV report emission.

Reports format every float with 12 significant digits and write infinities
as the strings "Infinity" / "-Infinity", so identical inputs give
byte-identical files and both formats parse back to the same values.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import numpy as np

from .domain import UDAClass, validate_class
from .errors import ValidationError

SCHEMA_VERSION = 1
SIG_DIGITS = 12
_SENTINELS = {"Infinity": math.inf, "-Infinity": -math.inf, "NaN": math.nan}


def canonical(value: Any) -> Any:
    """JSON-ready copy with rounded floats and string sentinels for non-finite values."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "NaN"
        if math.isinf(value):
            return "Infinity" if value > 0 else "-Infinity"
        rounded = float(f"{value:.{SIG_DIGITS}g}")
        return 0.0 if rounded == 0 else rounded
    if isinstance(value, Mapping):
        return {str(k): canonical(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return [canonical(v) for v in value.tolist()]
    if isinstance(value, (list, tuple, set, frozenset)):
        items = sorted(value) if isinstance(value, (set, frozenset)) else value
        return [canonical(v) for v in items]
    if value is None or isinstance(value, str):
        return value
    raise TypeError(f"cannot serialize {type(value).__name__}")


def decode(value: Any) -> Any:
    """Inverse of ``canonical`` for the sentinels: "Infinity" -> inf, etc."""
    if isinstance(value, str):
        return _SENTINELS.get(value, value)
    if isinstance(value, list):
        return [decode(v) for v in value]
    if isinstance(value, dict):
        return {k: decode(v) for k, v in value.items()}
    return value


def make_report(command: str, config: Mapping[str, Any], result: Any) -> dict:
    return {"schema_version": SCHEMA_VERSION, "command": command, "config": dict(config), "result": result}


def dumps_json(report: Mapping[str, Any]) -> str:
    return json.dumps(canonical(report), indent=2, allow_nan=False) + "\n"


def _flatten(prefix: str, value: Any, out: list[tuple[str, Any]]) -> None:
    if isinstance(value, Mapping):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(value, list) and value and isinstance(value[0], (Mapping, list)):
        for i, v in enumerate(value):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, value))


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, list):
        return json.dumps(value)
    return str(value)


def report_rows(report: Mapping[str, Any]) -> tuple[list[str], list[list[str]]]:
    """Tabular view of a report.

    A result that is a list of flat records becomes one row per record;
    anything else becomes (field, value) rows with dotted paths.
    """
    result = canonical(report["result"])
    if isinstance(result, list) and result and all(isinstance(r, dict) for r in result):
        header = list(result[0])
        for r in result[1:]:
            header += [k for k in r if k not in header]
        return header, [[_cell(r.get(h)) for h in header] for r in result]
    flat: list[tuple[str, Any]] = []
    _flatten("", result, flat)
    return ["field", "value"], [[k, _cell(v)] for k, v in flat]


def dumps_csv(report: Mapping[str, Any]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    buf.write(f"# schema_version={SCHEMA_VERSION} command={report['command']}\n")
    for key, value in canonical(report["config"]).items():
        buf.write(f"# {key}={_cell(value)}\n")
    header, rows = report_rows(report)
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def parse_csv(text: str) -> list[dict]:
    """Rows of a CSV report as dicts, numbers and sentinels decoded."""
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    out = []
    for row in csv.DictReader(lines):
        out.append({k: _parse_cell(v) for k, v in row.items()})
    return out


def _parse_cell(text: str) -> Any:
    if text == "":
        return None
    if text in _SENTINELS:
        return _SENTINELS[text]
    if text in ("True", "False"):
        return text == "True"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if text.startswith("["):
        return decode(json.loads(text))
    return text


def write_report(report: Mapping[str, Any], fmt: str = "json", out: str | Path | None = None) -> str:
    text = dumps_json(report) if fmt == "json" else dumps_csv(report)
    if out is not None:
        Path(out).write_text(text, encoding="utf-8")
    return text


# ---------------------------------------------------------------------------
# class files


def class_to_dict(pi: UDAClass) -> dict:
    """Class description in the file schema (full float precision)."""
    dom = pi.family.domain
    points = []
    for i in range(dom.size):
        pt: dict[str, Any] = {"id": i}
        if dom.coords is not None:
            pt["coords"] = [float(c) for c in dom.coords[i]]
        if dom.angles is not None:
            pt["angle"] = float(dom.angles[i])
        points.append(pt)
    entries = []
    for e in pi.entries:
        entries.append(
            {
                "weight": float(e.weight),
                "p": {str(int(i)): float(e.p.probs[i]) for i in e.p.support},
                "q": {str(int(i)): float(e.q.probs[i]) for i in e.q.support},
                "prior_f": {k: float(v) for k, v in e.prior_f.items()},
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "domain": {"metric": dom.metric, "points": points},
        "labels": list(pi.family.labels.labels),
        "classifiers": [{"id": n, "table": t.tolist()} for n, t in zip(pi.family.names, pi.family.tables)],
        "uda_class": {"entries": entries},
    }


def dump_class(pi: UDAClass, path: str | Path) -> None:
    Path(path).write_text(json.dumps(class_to_dict(pi), separators=(",", ":")) + "\n", encoding="utf-8")


def load_class(path: str | Path) -> UDAClass:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError.single("Unreadable", f"{path}: {exc}") from exc
    return validate_class(raw)
