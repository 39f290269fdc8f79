"""Seeded synthetic ports, voyages and regions.

Stand-in for the commercial voyage and port databases. Vessels run loop
services with occasional detours, so the itineraries carry real second-order
structure for the rule grower to find. Daily shipping costs in
``SYNTH_DAILY_COST_USD`` are placeholders, not published figures.
"""

from __future__ import annotations

from datetime import datetime, timedelta
from types import MappingProxyType

import numpy as np

from .ingest import (
    VESSEL_TYPES,
    Dataset,
    EcoregionAdjacency,
    IngestReport,
    PortRecord,
    Region,
    VoyageRecord,
)

SYNTH_DAILY_COST_USD = {"bulker": 12_000.0, "containership": 30_000.0, "other": 8_000.0, "tanker": 20_000.0}

_DWT_RANGE = {
    "containership": (20_000, 150_000),
    "bulker": (30_000, 200_000),
    "tanker": (40_000, 300_000),
    "other": (5_000, 50_000),
}
_START = datetime(2019, 1, 1)


def _code(i: int, prefix: str) -> str:
    return prefix + chr(65 + (i // 26) % 26) + chr(65 + i % 26)


def synth_dataset(seed: int, n_ports: int, n_voyages: int, n_regions: int | None = None,
                  detour_prob: float = 0.15) -> Dataset:
    if n_ports < 2:
        raise ValueError(f"need at least 2 ports, got {n_ports}")
    if n_voyages < 1:
        raise ValueError(f"need at least 1 voyage, got {n_voyages}")
    rng = np.random.default_rng(seed)

    if n_regions is None:
        n_regions = max(2, min(8, n_ports // 3))
    n_regions = max(2, min(n_regions, n_ports))
    regions = tuple(
        Region(f"R{r:02d}", f"Region {r:02d}", float(round(float(rng.lognormal(9.0, 1.0)), -1) or 10.0),
               bool(rng.random() < 0.3), bool(rng.random() < 0.3))
        for r in range(n_regions)
    )

    n_eco = max(2, n_ports // 4)
    eco_of_port = np.arange(n_ports) % n_eco
    rng.shuffle(eco_of_port)
    eco_temp = rng.uniform(2.0, 28.0, n_eco)
    eco_sal = rng.uniform(15.0, 36.0, n_eco)
    # with only two ecoregions a neighbour pair would gate every leg to zero risk
    neighbours = [(f"E{k:02d}", f"E{k + 1:02d}") for k in range(n_eco - 1)
                  if rng.random() < 0.3] if n_eco >= 3 else []

    ports = []
    for i in range(n_ports):
        e = int(eco_of_port[i])
        region_idx = i % n_regions
        temp = float(np.clip(eco_temp[e] + rng.normal(0.0, 1.5), -5.0, 45.0))
        sal = float(np.clip(eco_sal[e] + rng.normal(0.0, 2.0), 0.0, 45.0))
        ports.append(PortRecord(
            f"P{i:03d}", f"Port {i:03d}", _code(region_idx, "Q"), regions[region_idx].region_id,
            round(float(rng.uniform(-60, 60)), 4), round(float(rng.uniform(-180, 180)), 4),
            round(temp, 2), round(sal, 2), f"E{e:02d}",
        ))
    port_ids = [p.port_id for p in ports]

    n_services = max(2, n_ports // 3)
    services = []
    for _ in range(n_services):
        length = int(rng.integers(3, min(6, n_ports) + 1)) if n_ports >= 3 else 2
        services.append([port_ids[k] for k in rng.choice(n_ports, size=length, replace=False)])

    n_vessels = max(1, round(n_voyages / 20))
    per_vessel = [n_voyages // n_vessels + (k < n_voyages % n_vessels) for k in range(n_vessels)]
    voyages = []
    vid = 0
    for k in range(n_vessels):
        vtype = VESSEL_TYPES[int(rng.integers(len(VESSEL_TYPES)))]
        lo, hi = _DWT_RANGE[vtype]
        dwt = float(int(rng.integers(lo, hi)))
        service = services[int(rng.integers(n_services))]
        pos = int(rng.integers(len(service)))
        here = service[pos]
        when = _START + timedelta(days=int(rng.integers(0, 30)))
        for _ in range(per_vessel[k]):
            if rng.random() < detour_prob:
                choices = [p for p in port_ids if p != here]
                there = choices[int(rng.integers(len(choices)))]
            else:
                pos = (pos + 1) % len(service)
                there = service[pos]
                if there == here:
                    pos = (pos + 1) % len(service)
                    there = service[pos]
            arrive = when + timedelta(days=int(rng.integers(2, 26)))
            discharge = 0.0 if rng.random() < 0.25 else float(round(dwt * float(rng.uniform(0.05, 0.35))))
            vid += 1
            voyages.append(VoyageRecord(f"V{vid:06d}", f"S{k:04d}", vtype, dwt, here, there,
                                        when, arrive, discharge))
            here = there
            when = arrive + timedelta(days=int(rng.integers(0, 4)))

    params = MappingProxyType({"daily_cost_usd": dict(SYNTH_DAILY_COST_USD)})
    return Dataset(tuple(ports), tuple(voyages), regions, EcoregionAdjacency.from_pairs(neighbours),
                   params, IngestReport(len(ports), len(voyages), len(regions)))
