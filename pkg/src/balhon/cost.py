"""Ballast-treatment compliance cost against baseline shipping cost."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

from .ingest import CostParams, Dataset, VoyageRecord, voyage_duration


class ZeroTreatments(ValueError):
    pass


class UnknownVesselType(KeyError):
    pass


def voyage_compliance_cost(v: VoyageRecord, n_treatments: int, cp: CostParams) -> float:
    """Annual system cost shared over the vessel's treatments plus per-tonne treatment.

    A voyage that discharges nothing still carries its share of the fixed cost.
    """
    if n_treatments < 1:
        raise ZeroTreatments(f"vessel {v.vessel_id}: number of treatments must be >= 1")
    fixed = (cp.annual_capital_usd + cp.annual_operating_usd) / n_treatments
    return fixed + cp.per_tonne_treatment_usd * v.discharge_volume


def treatment_counts(dataset: Dataset) -> dict[str, int]:
    """Discharging voyages per vessel, floored at one.

    The whole dataset is treated as one year of traffic.
    """
    counts: dict[str, int] = defaultdict(int)
    for v in dataset.voyages:
        counts[v.vessel_id] += v.discharge_volume > 0
    return {k: max(1, n) for k, n in sorted(counts.items())}


def count_annual_treatments(dataset: Dataset, vessel_id: str) -> int:
    legs = [v for v in dataset.voyages if v.vessel_id == vessel_id]
    if not legs:
        raise KeyError(f"vessel {vessel_id!r} not in dataset")
    return max(1, sum(v.discharge_volume > 0 for v in legs))


def baseline_voyage_cost(v: VoyageRecord, cp: CostParams) -> float:
    try:
        daily = cp.daily_cost_usd[v.vessel_type]
    except KeyError:
        raise UnknownVesselType(f"no daily cost for vessel type {v.vessel_type!r}") from None
    return voyage_duration(v) * daily


@dataclass(frozen=True)
class RouteCostChange:
    origin_region: str
    dest_region: str
    baseline_usd: float
    compliance_usd: float
    pct_change: float
    n_voyages: int = 0


def cost_change_matrix(dataset: Dataset, cp: CostParams) -> dict[tuple[str, str], RouteCostChange]:
    """Annual baseline and compliance cost per directed region pair.

    Pairs without traffic have no entry. ``pct_change`` is the compliance cost
    as a fraction of the baseline cost (``inf`` if only the baseline is zero).
    """
    n_treat = treatment_counts(dataset)
    base: dict[tuple[str, str], list[float]] = defaultdict(list)
    comp: dict[tuple[str, str], list[float]] = defaultdict(list)
    for v in sorted(dataset.voyages, key=lambda v: v.voyage_id):
        key = (dataset.port(v.origin_port).region_id, dataset.port(v.dest_port).region_id)
        base[key].append(baseline_voyage_cost(v, cp))
        comp[key].append(voyage_compliance_cost(v, n_treat[v.vessel_id], cp))

    out = {}
    for key in sorted(base):
        b, c = math.fsum(base[key]), math.fsum(comp[key])
        if b > 0:
            pct = c / b
        else:
            pct = math.inf if c > 0 else 0.0
        out[key] = RouteCostChange(key[0], key[1], b, c, pct, len(base[key]))
    return out
