"""Report containers and deterministic file emission.

CSV files carry a header row and 17-significant-digit floats; every run
directory gets a manifest recording the config hash, library version and
the tolerances in force, so identical configs produce byte-identical
outputs whatever the thread count.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field

__all__ = ["SweepReport", "format_value", "write_csv", "write_manifest"]


@dataclass
class SweepReport:
    """Outcome of a ratio sweep over an input family.

    rows hold one dict per member; sup_ratio / min_ratio summarize the
    finite ratios.  status is "ok" or "skipped" (empty or degenerate
    family); parameter is the p or alpha the sweep ran at.
    """

    kind: str
    parameter: float
    rows: list
    sup_ratio: float = float("nan")
    min_ratio: float = float("nan")
    status: str = "ok"
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_rows(cls, kind, parameter, rows, **meta):
        finite = [r["ratio"] for r in rows
                  if isinstance(r.get("ratio"), float) and math.isfinite(r["ratio"])]
        if not rows:
            return cls(kind=kind, parameter=parameter, rows=[],
                       status="skipped", meta=dict(meta, reason="empty family"))
        return cls(kind=kind, parameter=parameter, rows=rows,
                   sup_ratio=max(finite) if finite else float("nan"),
                   min_ratio=min(finite) if finite else float("nan"),
                   status="ok", meta=dict(meta))

    def spread(self):
        """max ratio / min ratio, the empirical uniformity measure."""
        if not math.isfinite(self.sup_ratio) or self.min_ratio <= 0:
            return float("inf")
        return self.sup_ratio / self.min_ratio


def format_value(v):
    if isinstance(v, float):
        return "%.17g" % v
    if isinstance(v, (int, bool)):
        return str(int(v))
    return str(v)


def write_csv(path, rows, columns=None):
    """Rows of dicts to CSV; column order from the first row unless given."""
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    lines = [",".join(columns)]
    for r in rows:
        lines.append(",".join(format_value(r.get(c, "")) for c in columns))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(path, config, tolerances=None, extra=None):
    from . import __version__

    doc = {
        "config": config,
        "config_sha256": config_hash(config),
        "version": __version__,
        "tolerances": dict(tolerances or {}),
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
