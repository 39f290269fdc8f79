"""Complement-product aggregation of risks and policy comparisons by region."""

from __future__ import annotations

import math
import warnings
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .ingest import Dataset, Region


class UndefinedReduction(ValueError):
    """Reduction is meaningless when the no-policy risk is zero."""


class EmptyRegion(UserWarning):
    pass


def aggregate_pair_risk(route_probs: Iterable[float]) -> float:
    """Probability that at least one of several independent routes spreads.

    Computed as ``1 - exp(sum(log1p(-p)))`` so long products do not underflow.
    """
    logs = []
    for p in route_probs:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability outside [0, 1]: {p!r}")
        if p == 1.0:
            return 1.0
        logs.append(math.log1p(-p))
    if not logs:
        return 0.0
    return -math.expm1(math.fsum(logs))


def cumulative_port_risk(incoming: Iterable[float]) -> float:
    return aggregate_pair_risk(incoming)


def port_risks(adjacency, ports: Sequence[str] | None = None) -> dict[str, float]:
    """Cumulative risk of every port from the column of incoming pair risks."""
    out = {}
    for port in sorted(ports if ports is not None else adjacency.ports):
        if port in adjacency.ports:
            out[port] = cumulative_port_risk(sorted(adjacency.incoming(port)))
        else:
            out[port] = 0.0
    return out


@dataclass(frozen=True)
class PortRisk:
    port_id: str
    cumulative_risk: float


def reduction_stats(no_policy: float, policy: float) -> tuple[float, float]:
    """``(reduction, fold_change)`` of a risk under policy.

    ``reduction`` is a fraction, ``(no_policy - policy) / no_policy``;
    ``fold_change`` is ``no_policy / policy`` and ``inf`` when the policy
    risk is zero.
    """
    for name, v in (("no_policy", no_policy), ("policy", policy)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} risk outside [0, 1]: {v!r}")
    if no_policy == 0:
        raise UndefinedReduction("no-policy risk is zero")
    reduction = (no_policy - policy) / no_policy
    fold = math.inf if policy == 0 else no_policy / policy
    return reduction, fold


@dataclass(frozen=True)
class RegionRiskSummary:
    region_id: str
    risk_no_policy: float
    risk_policy: float
    reduction_pct: float
    fold_change: float
    n_ports: int = 0


def region_means(port_risks: Mapping[str, float], ports_to_region: Mapping[str, str]) -> dict[str, float]:
    by_region: dict[str, list[float]] = defaultdict(list)
    for port in sorted(port_risks):
        by_region[ports_to_region[port]].append(port_risks[port])
    return {r: math.fsum(v) / len(v) for r, v in sorted(by_region.items())}


def region_risk_summary(
    port_risks_no_policy: Mapping[str, float],
    port_risks_policy: Mapping[str, float],
    regions: Dataset | Mapping[str, str],
    registry: Iterable[Region] | None = None,
) -> list[RegionRiskSummary]:
    """Unweighted mean port risk per region under both scenarios.

    ``regions`` is either a dataset or a plain ``port -> region`` mapping.
    Registered regions without ports raise an :class:`EmptyRegion` warning and
    are left out. A region whose no-policy mean is zero gets ``nan`` for both
    comparison columns.
    """
    if set(port_risks_no_policy) != set(port_risks_policy):
        raise ValueError("scenario port sets differ")
    if isinstance(regions, Dataset):
        mapping = {p.port_id: p.region_id for p in regions.ports}
        registry = regions.regions if registry is None else registry
    else:
        mapping = dict(regions)
    counts: dict[str, int] = defaultdict(int)
    for port in port_risks_no_policy:
        counts[mapping[port]] += 1
    base = region_means(port_risks_no_policy, mapping)
    treated = region_means(port_risks_policy, mapping)
    if registry is not None:
        for region in registry:
            if region.region_id not in base:
                warnings.warn(f"region {region.region_id} has no ports", EmptyRegion, stacklevel=2)

    out = []
    for rid in sorted(base):
        a, b = base[rid], treated[rid]
        try:
            red, fold = reduction_stats(a, b)
        except UndefinedReduction:
            red, fold = math.nan, math.nan
        out.append(RegionRiskSummary(rid, a, b, red, fold, counts[rid]))
    return out
