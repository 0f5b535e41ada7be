"""Check reports.

Reports are plain data: a name, a verdict, numeric metrics and free-form
details.  Rendering is deterministic (sorted keys, fixed float format, no
timestamps) so identical runs produce byte-identical files.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np


def _clean(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if math.isnan(v) or math.isinf(v):
            return repr(v)
        return v
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6e}"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}: {_fmt(x)}" for k, x in sorted(v.items())) + "}"
    return str(v)


@dataclass
class Report:
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    seed: int | None = None

    def __bool__(self):
        return bool(self.passed)

    def to_dict(self):
        d = {"name": self.name, "passed": bool(self.passed),
             "metrics": _clean(self.metrics), "details": _clean(self.details)}
        if self.seed is not None:
            d["seed"] = int(self.seed)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_text(self):
        lines = [f"[{'PASS' if self.passed else 'FAIL'}] {self.name}"]
        if self.seed is not None:
            lines.append(f"  seed: {self.seed}")
        d = self.to_dict()
        for k in sorted(d["metrics"]):
            lines.append(f"  {k}: {_fmt(d['metrics'][k])}")
        for k in sorted(d["details"]):
            lines.append(f"  {k}: {_fmt(d['details'][k])}")
        return "\n".join(lines)


def render(reports, as_json=False):
    if as_json:
        return json.dumps([r.to_dict() for r in reports], sort_keys=True, indent=2) + "\n"
    return "\n".join(r.to_text() for r in reports) + "\n"
