"""Per-leg species spread probability.

A leg moves ballast from a source port to a sink port. Its spread
probability is the product of three factors: a nonindigenous gate (zero when
the ports share or border an ecoregion), the introduction probability of the
discharged volume after in-tank mortality, and an environmental-match
establishment probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .ingest import EcoregionAdjacency, PortRecord, RiskParams


@dataclass(frozen=True)
class LegContext:
    discharge_tonnes: float
    duration_days: float
    temp_diff: float
    sal_diff: float
    same_or_neighbor_ecoregion: bool
    params: RiskParams

    def __post_init__(self):
        for name in ("discharge_tonnes", "duration_days", "temp_diff", "sal_diff"):
            v = getattr(self, name)
            if not v >= 0:
                raise ValueError(f"{name} must be >= 0, got {v!r}")

    @classmethod
    def between(cls, source: PortRecord, sink: PortRecord, discharge_tonnes: float,
                duration_days: float, adjacency: EcoregionAdjacency, params: RiskParams) -> "LegContext":
        return cls(
            discharge_tonnes,
            duration_days,
            abs(source.temperature - sink.temperature),
            abs(source.salinity - sink.salinity),
            adjacency.same_or_neighbor(source.ecoregion_id, sink.ecoregion_id),
            params,
        )


def nonindigenous_indicator(ctx: LegContext) -> int:
    return 0 if ctx.same_or_neighbor_ecoregion else 1


def _untreated_intro(ctx: LegContext) -> float:
    p = ctx.params
    # -expm1 keeps precision when intro_potential * volume is tiny
    return -math.expm1(-p.intro_potential * ctx.discharge_tonnes) * math.exp(-p.mortality_rate * ctx.duration_days)


def intro_probability(ctx: LegContext) -> float:
    return ctx.params.survival_factor * _untreated_intro(ctx)


def establish_probability(ctx: LegContext) -> float:
    p = ctx.params
    zt = ctx.temp_diff / p.temp_tolerance
    zs = ctx.sal_diff / p.salinity_tolerance
    return p.establish_ceiling * math.exp(-0.5 * (zt * zt + zs * zs))


def spread_probability(ctx: LegContext) -> float:
    """Spread probability of one leg, in ``[0, survival_factor * establish_ceiling]``.

    The survival factor multiplies last so that scaling it scales the result
    by exactly the same factor.
    """
    if not nonindigenous_indicator(ctx):
        return 0.0
    return ctx.params.survival_factor * (_untreated_intro(ctx) * establish_probability(ctx))
