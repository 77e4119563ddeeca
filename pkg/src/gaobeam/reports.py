"""Report writers.  CSV floats use ``repr`` (shortest round-trip decimal), so
identical runs produce byte-identical files."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .analysis.energy import EnergyLedger

ENERGY_COLUMNS = ("step", "time", "kinetic", "bending", "nonlinear_mu", "concentrated", "tau_residual")
SWEEP_COLUMNS = ("eps_a", "eps_b", "h2alpha_diff", "linf_ux_diff", "l2_conv_diff", "weak39_residual",
                 "weak13_residual")
# the sweep CSV carries the H^{2 - alpha} difference for this alpha; the JSON has both
CSV_ALPHA = 0.5


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def energy_csv(ledger: EnergyLedger) -> str:
    return _csv_text(ENERGY_COLUMNS, ledger.rows())


def sweep_csv(pairs) -> str:
    """One row per consecutive ladder pair; failed pairs keep the epsilons and leave the rest empty."""
    rows = []
    for p in pairs:
        if "failure" in p:
            rows.append((p["eps_a"], p["eps_b"]) + (None,) * (len(SWEEP_COLUMNS) - 2))
            continue
        rows.append((p["eps_a"], p["eps_b"], p[f"h2alpha_diff_{CSV_ALPHA}"], p["linf_ux_diff"],
                     p["l2_conv_diff"], p["weak39_residual"], p["weak13_residual"]))
    return _csv_text(SWEEP_COLUMNS, rows)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None  # strict JSON has no nan/inf
    return value


def report_json(payload: dict) -> str:
    return json.dumps(_jsonable(payload), indent=2, allow_nan=False) + "\n"


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path
