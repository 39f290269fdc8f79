"""Lorenz curves and Gini coefficients of a regional metric against income."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence


class DegenerateInput(ValueError):
    pass


@dataclass(frozen=True)
class RegionDatum:
    region_id: str
    income: float
    metric: float

    def __post_init__(self):
        if not self.income > 0:
            raise ValueError(f"{self.region_id}: income must be > 0, got {self.income!r}")
        if not math.isfinite(self.metric):
            raise ValueError(f"{self.region_id}: metric must be finite, got {self.metric!r}")


@dataclass(frozen=True)
class LorenzCurve:
    """Cumulative (income share, metric share) points from (0, 0) to (1, 1).

    ``order`` lists regions in the order they were accumulated and
    ``negative`` the regions whose metric was negative and folded to its
    absolute value.
    """

    points: tuple[tuple[float, float], ...]
    gini: float
    order: tuple[str, ...] = ()
    negative: tuple[str, ...] = ()
    sort: str = "intensity"


def lorenz_points(data: Sequence[RegionDatum], sort: str = "intensity") -> LorenzCurve:
    """Build the curve, sorting regions by ``metric / income`` (or by income).

    Ties break on ``region_id`` so the input order never matters.
    """
    if len(data) < 2:
        raise DegenerateInput("need at least two regions")
    if sort not in ("intensity", "income"):
        raise ValueError(f"sort must be 'intensity' or 'income', got {sort!r}")
    negative = tuple(sorted(d.region_id for d in data if d.metric < 0))
    rows = [(d.region_id, d.income, abs(d.metric)) for d in data]
    total_metric = math.fsum(r[2] for r in rows)
    total_income = math.fsum(r[1] for r in rows)
    if total_metric <= 0:
        raise DegenerateInput("all metrics are zero")
    if sort == "intensity":
        rows.sort(key=lambda r: (r[2] / r[1], r[0]))
    else:
        rows.sort(key=lambda r: (r[1], r[0]))

    points = [(0.0, 0.0)]
    cum_income = cum_metric = 0.0
    for i, (_, inc, m) in enumerate(rows):
        cum_income += inc
        cum_metric += m
        if i == len(rows) - 1:
            points.append((1.0, 1.0))
        else:
            points.append((cum_income / total_income, cum_metric / total_metric))
    pts = tuple(points)
    return LorenzCurve(pts, _gini_from_points(pts, sort), tuple(r[0] for r in rows), negative, sort)


def _gini_from_points(points: Sequence[tuple[float, float]], sort: str = "intensity") -> float:
    area = math.fsum((x1 - x0) * (y0 + y1) / 2.0 for (x0, y0), (x1, y1) in zip(points, points[1:]))
    g = 1.0 - 2.0 * area
    # an intensity-sorted curve never rises above the diagonal; only rounding can push g below 0
    return max(g, 0.0) if sort == "intensity" else g


def gini(curve: LorenzCurve) -> float:
    """One minus twice the trapezoidal area under the curve."""
    return _gini_from_points(curve.points, curve.sort)


def write_lorenz_csv(curve: LorenzCurve, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("cum_income_share", "cum_metric_share"))
    for x, y in curve.points:
        w.writerow((f"{x:.6f}", f"{y:.6f}"))
    w.writerow(("gini", f"{curve.gini:.6f}"))


def read_lorenz_csv(fh) -> tuple[list[tuple[float, float]], float]:
    rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != ("cum_income_share", "cum_metric_share"):
        raise ValueError("bad lorenz.csv header")
    if rows[-1][0] != "gini":
        raise ValueError("lorenz.csv lacks a trailing gini record")
    points = [(float(x), float(y)) for x, y in rows[1:-1]]
    return points, float(rows[-1][1])


def region_data(rows: Iterable[dict], metric_col: str, income_col: str, id_col: str | None = None) -> list[RegionDatum]:
    """RegionDatum list from dict rows (e.g. ``csv.DictReader``)."""
    out = []
    for i, row in enumerate(rows):
        rid = row.get(id_col) if id_col else row.get("region_id", str(i))
        out.append(RegionDatum(str(rid), float(row[income_col]), float(row[metric_col])))
    return out
