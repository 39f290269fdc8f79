"""Named scenarios run through the whole pipeline, and baseline/treated comparisons."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from .aggregate import RegionRiskSummary, port_risks, region_means, region_risk_summary
from .cost import RouteCostChange, cost_change_matrix
from .hon import (
    HonNetwork,
    HonParams,
    HonRule,
    PathObservation,
    PhysicalAdjacency,
    build_hon_network,
    extract_paths,
    grow_rules,
    normalize_edges,
    project_physical,
)
from .ingest import (
    IMO_TREATMENT_EFFICACY,
    CostParams,
    Dataset,
    DischargeProfile,
    ParamsError,
    RiskParams,
    split_params,
)

log = logging.getLogger(__name__)

NORMALIZATION_MODES = ("raw", "per_scenario")


class DatasetMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything that defines one scenario run.

    ``normalization="raw"`` keeps the projected pair risks as they are;
    ``"per_scenario"`` divides them by the scenario's own largest pair risk
    before port aggregation. A non-empty ``dataset_hash`` pins the scenario
    to one dataset; running it on anything else raises ``DatasetMismatch``.
    """

    name: str
    risk: RiskParams
    cost: CostParams = field(default_factory=CostParams)
    hon: HonParams = field(default_factory=HonParams)
    discharge: DischargeProfile = field(default_factory=DischargeProfile)
    normalization: str = "raw"
    dataset_hash: str = ""

    def __post_init__(self):
        if self.normalization not in NORMALIZATION_MODES:
            raise ParamsError(f"normalization must be one of {NORMALIZATION_MODES}, got {self.normalization!r}")
        if not self.name:
            raise ParamsError("scenario needs a name")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], base: Mapping[str, Any] | None = None,
                  source: str = "scenario") -> "ScenarioConfig":
        """Build from a scenario mapping; ``base`` holds flat defaults (a params.json)."""
        allowed = {"name", "risk", "cost", "hon", "discharge", "normalization", "dataset_hash"}
        unknown = set(d) - allowed
        if unknown:
            raise ParamsError(f"unknown scenario key(s) {sorted(unknown)}", file=source)
        sections = split_params(base or {}, source="params")
        for key in ("risk", "cost", "discharge"):
            override = split_params(d.get(key, {}), source=source)
            if any(k != key and override[k] for k in override):
                raise ParamsError(f"section {key!r} holds parameters from another section", file=source)
            sections[key].update(override[key])
        risk = sections["risk"]
        if "establish_ceiling" not in risk:
            raise ParamsError("establish_ceiling (alpha) has no default and must be set", file=source)
        try:
            hon = HonParams(**d.get("hon", {}))
        except (TypeError, ValueError) as exc:
            raise ParamsError(f"bad hon section: {exc}", file=source) from None
        try:
            return cls(
                name=str(d.get("name", Path(source).stem)),
                risk=RiskParams(**risk),
                cost=CostParams(**sections["cost"]),
                hon=hon,
                discharge=DischargeProfile(tuple(sections["discharge"].get("fractions", DischargeProfile().fractions))),
                normalization=d.get("normalization", "raw"),
                dataset_hash=str(d.get("dataset_hash", "")),
            )
        except TypeError as exc:
            raise ParamsError(str(exc), file=source) from None

    @classmethod
    def load(cls, path: str | Path, base: Mapping[str, Any] | None = None) -> "ScenarioConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ParamsError(f"invalid JSON: {exc}", file=str(path)) from None
        return cls.from_dict(raw, base, source=str(path))

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "normalization": self.normalization,
            "risk": {k: getattr(self.risk, k) for k in (
                "intro_potential", "mortality_rate", "temp_tolerance", "salinity_tolerance",
                "establish_ceiling", "survival_factor")},
            "cost": self.cost.to_dict(),
            "hon": {"max_order": self.hon.max_order, "min_support": self.hon.min_support,
                    "divergence_threshold_scale": self.hon.divergence_threshold_scale,
                    "support": self.hon.support},
            "discharge": {"fractions": list(self.discharge.fractions)},
        }
        if self.dataset_hash:
            out["dataset_hash"] = self.dataset_hash
        return out

    @property
    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def with_treatment(self, efficacy: float = IMO_TREATMENT_EFFICACY, name: str | None = None) -> "ScenarioConfig":
        """Same scenario with ballast treatment removing ``efficacy`` of organisms."""
        return replace(self, name=name or f"{self.name}+treated",
                       risk=replace(self.risk, survival_factor=1.0 - efficacy))


@dataclass(frozen=True)
class ScenarioResult:
    config: ScenarioConfig
    dataset_hash: str
    adjacency: PhysicalAdjacency
    port_risks: Mapping[str, float]
    region_risks: Mapping[str, float]
    cost_matrix: Mapping[tuple[str, str], RouteCostChange]
    port_regions: Mapping[str, str]
    n_paths: int = 0
    n_rules: int = 0
    rule_orders: Mapping[int, int] = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return self.config.digest

    @property
    def name(self) -> str:
        return self.config.name


# the stages, exposed separately so intermediates can be cached and resumed


def stage_paths(dataset: Dataset, cfg: ScenarioConfig) -> list[PathObservation]:
    return extract_paths(dataset, cfg.discharge, cfg.risk)


def stage_rules(paths: list[PathObservation], cfg: ScenarioConfig, threads: int = 1) -> tuple[HonRule, ...]:
    return grow_rules(paths, cfg.hon, threads=threads)


def stage_adjacency(hon: HonNetwork, dataset: Dataset, cfg: ScenarioConfig) -> PhysicalAdjacency:
    adj = project_physical(hon, ports=[p.port_id for p in dataset.ports])
    if cfg.normalization == "per_scenario":
        adj = normalize_edges(adj)
    return adj


def assemble_result(dataset: Dataset, cfg: ScenarioConfig, adj: PhysicalAdjacency,
                    rules: tuple[HonRule, ...] = (), n_paths: int = 0) -> ScenarioResult:
    port_regions = {p.port_id: p.region_id for p in sorted(dataset.ports, key=lambda p: p.port_id)}
    risks = port_risks(adj, list(port_regions))
    orders: dict[int, int] = {}
    for r in rules:
        orders[r.order] = orders.get(r.order, 0) + 1
    return ScenarioResult(
        config=cfg,
        dataset_hash=dataset.digest,
        adjacency=adj,
        port_risks=risks,
        region_risks=region_means(risks, port_regions),
        cost_matrix=cost_change_matrix(dataset, cfg.cost),
        port_regions=port_regions,
        n_paths=n_paths,
        n_rules=len(rules),
        rule_orders=dict(sorted(orders.items())),
    )


def run_scenario(dataset: Dataset, cfg: ScenarioConfig, threads: int = 1) -> ScenarioResult:
    """Paths, rules, network, projection, optional normalization, aggregation and costs."""
    if cfg.dataset_hash and cfg.dataset_hash != dataset.digest:
        raise DatasetMismatch(f"scenario {cfg.name!r} is pinned to dataset {cfg.dataset_hash[:12]}, "
                              f"got {dataset.digest[:12]}")
    paths = stage_paths(dataset, cfg)
    rules = stage_rules(paths, cfg, threads)
    hon = build_hon_network(rules)
    adj = stage_adjacency(hon, dataset, cfg)
    log.info("scenario %s: %d paths, %d rules, %d states", cfg.name, len(paths), len(rules), len(hon.states))
    return assemble_result(dataset, cfg, adj, rules, len(paths))


@dataclass(frozen=True)
class CostDelta:
    origin_region: str
    dest_region: str
    compliance_baseline_usd: float
    compliance_treated_usd: float

    @property
    def delta_usd(self) -> float:
        return self.compliance_treated_usd - self.compliance_baseline_usd


@dataclass(frozen=True)
class ComparisonReport:
    baseline: str
    treated: str
    dataset_hash: str
    regions: tuple[RegionRiskSummary, ...]
    cost_deltas: tuple[CostDelta, ...]


def compare_scenarios(a: ScenarioResult, b: ScenarioResult, registry=None) -> ComparisonReport:
    """Region reductions of ``b`` (treated) against ``a`` (baseline)."""
    if a.dataset_hash != b.dataset_hash:
        raise DatasetMismatch(f"scenarios ran on different datasets ({a.dataset_hash[:12]} vs {b.dataset_hash[:12]})")
    summaries = region_risk_summary(a.port_risks, b.port_risks, a.port_regions, registry)
    deltas = []
    for key in sorted(set(a.cost_matrix) | set(b.cost_matrix)):
        ca = a.cost_matrix[key].compliance_usd if key in a.cost_matrix else 0.0
        cb = b.cost_matrix[key].compliance_usd if key in b.cost_matrix else 0.0
        deltas.append(CostDelta(key[0], key[1], ca, cb))
    return ComparisonReport(a.name, b.name, a.dataset_hash, tuple(summaries), tuple(deltas))


def reduction_range(report: ComparisonReport) -> tuple[float, float]:
    vals = [s.reduction_pct for s in report.regions if not math.isnan(s.reduction_pct)]
    return min(vals), max(vals)
