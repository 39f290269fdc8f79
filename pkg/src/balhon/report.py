"""Report files: region_risk.csv, cost_matrix.csv, lorenz.csv and manifest.json.

Numbers are written with six decimals (risks in scientific notation, since
treated risks are often far below 1e-6) so output is byte-stable.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Mapping

from . import __version__
from .aggregate import RegionRiskSummary
from .cost import RouteCostChange

REGION_RISK_COLUMNS = ("region_id", "risk_no_policy", "risk_policy", "reduction_pct", "fold_change")
COST_MATRIX_COLUMNS = ("origin_region", "dest_region", "baseline_usd", "compliance_usd", "pct_change")


def fmt_fixed(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def fmt_risk(x: float) -> str:
    if math.isnan(x):
        return "nan"
    return f"{x:.6e}"


def write_region_risk_csv(summaries: Iterable[RegionRiskSummary], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(REGION_RISK_COLUMNS)
    for s in sorted(summaries, key=lambda s: s.region_id):
        w.writerow((s.region_id, fmt_risk(s.risk_no_policy), fmt_risk(s.risk_policy),
                    fmt_fixed(s.reduction_pct), fmt_fixed(s.fold_change)))


def read_region_risk_csv(fh) -> list[RegionRiskSummary]:
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != REGION_RISK_COLUMNS:
        raise ValueError(f"region_risk.csv header must be {','.join(REGION_RISK_COLUMNS)}")
    out = []
    for row in reader:
        a, b = float(row["risk_no_policy"]), float(row["risk_policy"])
        if not (0 <= a <= 1 and 0 <= b <= 1):
            raise ValueError(f"risk outside [0, 1] for region {row['region_id']}")
        out.append(RegionRiskSummary(row["region_id"], a, b, float(row["reduction_pct"]), float(row["fold_change"])))
    return out


def write_cost_matrix_csv(matrix: Mapping[tuple[str, str], RouteCostChange], fh) -> None:
    """One row per directed region pair with traffic; pairs without traffic are absent."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(COST_MATRIX_COLUMNS)
    for key in sorted(matrix):
        c = matrix[key]
        w.writerow((c.origin_region, c.dest_region, fmt_fixed(c.baseline_usd),
                    fmt_fixed(c.compliance_usd), fmt_fixed(c.pct_change)))


def read_cost_matrix_csv(fh) -> dict[tuple[str, str], RouteCostChange]:
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != COST_MATRIX_COLUMNS:
        raise ValueError(f"cost_matrix.csv header must be {','.join(COST_MATRIX_COLUMNS)}")
    out = {}
    for row in reader:
        key = (row["origin_region"], row["dest_region"])
        if key in out:
            raise ValueError(f"duplicate route {key}")
        vals = [float(row[c]) for c in ("baseline_usd", "compliance_usd", "pct_change")]
        if any(v < 0 for v in vals):
            raise ValueError(f"negative cost on route {key}")
        out[key] = RouteCostChange(key[0], key[1], *vals)
    return out


def write_manifest(path: Path, payload: dict) -> None:
    body = {"tool": "balhon", "version": __version__, **payload}
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
