"""Input records, model parameters, and CSV/JSON loading.

Everything downstream works from a :class:`Dataset`, an immutable bundle of
ports, voyages, the region registry and the ecoregion neighbour table. Rows
that break a record invariant are skipped and reported; ``strict=True`` turns
the first rejection into an exception instead.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field, fields
from datetime import date, datetime
from functools import cached_property
from pathlib import Path
from types import MappingProxyType
from typing import Any, Iterable, Mapping

log = logging.getLogger(__name__)

VESSEL_TYPES = ("containership", "bulker", "tanker", "other")

PORT_COLUMNS = (
    "port_id", "name", "country", "region_id", "lat", "lon",
    "temperature_c", "salinity_ppt", "ecoregion_id",
)
VOYAGE_COLUMNS = (
    "voyage_id", "vessel_id", "vessel_type", "dwt", "origin_port", "dest_port",
    "sail_date", "arrival_date", "discharge_tonnes",
)
REGION_COLUMNS = ("region_id", "region_name", "gdp_per_capita_usd", "is_sids", "is_ldc")
ADJACENCY_COLUMNS = ("ecoregion_a", "ecoregion_b")

TEMPERATURE_RANGE = (-5.0, 45.0)
SALINITY_RANGE = (0.0, 45.0)


class IngestError(ValueError):
    """Base class for input validation failures."""

    def __init__(self, message: str, file: str | None = None, line: int | None = None):
        self.file = file
        self.line = line
        where = ""
        if file is not None:
            where = f"{file}"
            if line is not None:
                where += f", line {line}"
            where += ": "
        super().__init__(where + message)


class MissingColumn(IngestError):
    pass


class UnknownPort(IngestError):
    pass


class InvariantViolation(IngestError):
    pass


class EmptyDataset(IngestError):
    pass


class ParamsError(IngestError):
    pass


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PortRecord:
    port_id: str
    name: str
    country: str
    region_id: str
    latitude: float
    longitude: float
    temperature: float
    salinity: float
    ecoregion_id: str


@dataclass(frozen=True)
class VoyageRecord:
    voyage_id: str
    vessel_id: str
    vessel_type: str
    dwt: float
    origin_port: str
    dest_port: str
    sail_date: datetime
    arrival_date: datetime
    discharge_volume: float

    @property
    def duration_days(self) -> float:
        return voyage_duration(self)


@dataclass(frozen=True)
class Region:
    region_id: str
    name: str
    gdp_per_capita: float | None = None
    is_sids: bool = False
    is_ldc: bool = False


@dataclass(frozen=True)
class EcoregionAdjacency:
    """Unordered pairs of ecoregions that count as neighbours."""

    pairs: frozenset[frozenset[str]] = frozenset()

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "EcoregionAdjacency":
        return cls(frozenset(frozenset((a, b)) for a, b in pairs if a != b))

    def same_or_neighbor(self, a: str, b: str) -> bool:
        return a == b or frozenset((a, b)) in self.pairs

    def sorted_pairs(self) -> list[tuple[str, str]]:
        return sorted(tuple(sorted(p)) for p in self.pairs)


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

IMO_TREATMENT_EFFICACY = 0.9915


@dataclass(frozen=True, kw_only=True)
class RiskParams:
    """Constants of the per-leg spread kernel.

    ``establish_ceiling`` has no accepted default and must always be given.
    ``survival_factor`` is the fraction of organisms surviving treatment:
    1.0 with no policy, ``1 - 0.9915`` under full Convention compliance.
    """

    establish_ceiling: float
    intro_potential: float = 3.22e-6
    mortality_rate: float = 0.02
    temp_tolerance: float = 2.0
    salinity_tolerance: float = 10.0
    survival_factor: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v) or v < 0:
                raise ParamsError(f"{f.name} must be finite and >= 0, got {v!r}")
        if not 0.0 < self.establish_ceiling <= 1.0:
            raise ParamsError(f"establish_ceiling must lie in (0, 1], got {self.establish_ceiling!r}")
        if self.survival_factor > 1.0:
            raise ParamsError(f"survival_factor must lie in [0, 1], got {self.survival_factor!r}")
        if self.temp_tolerance == 0 or self.salinity_tolerance == 0:
            raise ParamsError("temperature and salinity tolerances must be > 0")


@dataclass(frozen=True)
class CostParams:
    annual_capital_usd: float = 49_000.0
    annual_operating_usd: float = 13_500.0
    per_tonne_treatment_usd: float = 0.135
    daily_cost_usd: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("annual_capital_usd", "annual_operating_usd", "per_tonne_treatment_usd"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ParamsError(f"{name} must be finite and >= 0, got {v!r}")
        for vt, v in self.daily_cost_usd.items():
            if not math.isfinite(v) or v < 0:
                raise ParamsError(f"daily_cost_usd[{vt}] must be finite and >= 0, got {v!r}")
        object.__setattr__(self, "daily_cost_usd", MappingProxyType(dict(sorted(self.daily_cost_usd.items()))))

    def scaled(self, factor: float, include_daily: bool = False) -> "CostParams":
        daily = self.daily_cost_usd
        if include_daily:
            daily = {k: v * factor for k, v in daily.items()}
        return CostParams(
            self.annual_capital_usd * factor,
            self.annual_operating_usd * factor,
            self.per_tonne_treatment_usd * factor,
            dict(daily),
        )

    def to_dict(self) -> dict:
        return {
            "annual_capital_usd": self.annual_capital_usd,
            "annual_operating_usd": self.annual_operating_usd,
            "per_tonne_treatment_usd": self.per_tonne_treatment_usd,
            "daily_cost_usd": dict(self.daily_cost_usd),
        }


@dataclass(frozen=True)
class DischargeProfile:
    """Share of ballast taken up at a port that is released at each later call."""

    fractions: tuple[float, ...] = (0.5, 0.3, 0.2)

    def __post_init__(self):
        object.__setattr__(self, "fractions", tuple(float(f) for f in self.fractions))
        if not self.fractions:
            raise ParamsError("discharge profile needs at least one fraction")
        if any(not math.isfinite(f) or f < 0 for f in self.fractions):
            raise ParamsError(f"discharge fractions must be >= 0: {self.fractions}")
        if math.fsum(self.fractions) > 1.0 + 1e-12:
            raise ParamsError(f"discharge fractions sum above 1: {self.fractions}")

    @property
    def horizon(self) -> int:
        return len(self.fractions)

    def truncated(self, n_calls: int) -> tuple[float, ...]:
        """Fractions for a vessel with only ``n_calls`` later calls.

        The kept fractions are rescaled so their total matches the full profile.
        """
        if n_calls >= self.horizon:
            return self.fractions
        kept = self.fractions[:n_calls]
        kept_mass = math.fsum(kept)
        if kept_mass == 0.0:
            return tuple(0.0 for _ in kept)
        scale = math.fsum(self.fractions) / kept_mass
        return tuple(f * scale for f in kept)


# params.json keys. The short names are accepted as aliases.
_RISK_KEYS = {
    "intro_potential": "intro_potential", "lambda": "intro_potential",
    "mortality_rate": "mortality_rate", "mu": "mortality_rate",
    "temp_tolerance": "temp_tolerance", "delta_T": "temp_tolerance",
    "salinity_tolerance": "salinity_tolerance", "delta_S": "salinity_tolerance",
    "establish_ceiling": "establish_ceiling", "alpha": "establish_ceiling",
    "survival_factor": "survival_factor", "rho": "survival_factor",
}
_COST_KEYS = {
    "annual_capital_usd": "annual_capital_usd",
    "annual_operating_usd": "annual_operating_usd",
    "per_tonne_treatment_usd": "per_tonne_treatment_usd",
    "daily_cost_usd": "daily_cost_usd",
}
_DISCHARGE_KEYS = {"fractions": "fractions", "discharge_fractions": "fractions"}


def split_params(raw: Mapping[str, Any], source: str = "params") -> dict[str, dict[str, Any]]:
    """Sort a flat parameter mapping into risk/cost/discharge sections.

    Unknown keys raise :class:`ParamsError`.
    """
    out: dict[str, dict[str, Any]] = {"risk": {}, "cost": {}, "discharge": {}}
    for key, value in raw.items():
        for section, table in (("risk", _RISK_KEYS), ("cost", _COST_KEYS), ("discharge", _DISCHARGE_KEYS)):
            if key in table:
                canonical = table[key]
                if canonical in out[section]:
                    raise ParamsError(f"parameter {canonical!r} given twice", file=source)
                out[section][canonical] = value
                break
        else:
            raise ParamsError(f"unknown parameter {key!r}", file=source)
    return out


def load_params(path: str | Path) -> Mapping[str, Any]:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParamsError(f"invalid JSON: {exc}", file=str(path)) from None
    if not isinstance(raw, dict):
        raise ParamsError("expected a JSON object", file=str(path))
    sections = split_params(raw, source=str(path))
    # Build the objects once so bad values fail at load time.
    CostParams(**sections["cost"])
    if sections["discharge"]:
        DischargeProfile(tuple(sections["discharge"]["fractions"]))
    if "establish_ceiling" in sections["risk"]:
        RiskParams(**sections["risk"])
    return MappingProxyType(dict(sorted(raw.items())))


# ---------------------------------------------------------------------------
# dataset
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rejection:
    file: str
    line: int
    reason: str
    error: str

    def __str__(self):
        return f"{self.file}, line {self.line}: {self.error}: {self.reason}"


@dataclass(frozen=True)
class IngestReport:
    ports_kept: int = 0
    voyages_kept: int = 0
    regions_kept: int = 0
    rejections: tuple[Rejection, ...] = ()

    @property
    def rejected(self) -> int:
        return len(self.rejections)


@dataclass(frozen=True)
class Dataset:
    ports: tuple[PortRecord, ...]
    voyages: tuple[VoyageRecord, ...]
    regions: tuple[Region, ...]
    adjacency: EcoregionAdjacency = EcoregionAdjacency()
    params: Mapping[str, Any] = field(default_factory=lambda: MappingProxyType({}))
    report: IngestReport = field(default_factory=IngestReport, compare=False)

    @cached_property
    def port_index(self) -> Mapping[str, PortRecord]:
        return MappingProxyType({p.port_id: p for p in self.ports})

    @cached_property
    def region_index(self) -> Mapping[str, Region]:
        return MappingProxyType({r.region_id: r for r in self.regions})

    def port(self, port_id: str) -> PortRecord:
        return self.port_index[port_id]

    def vessel_voyages(self) -> dict[str, list[VoyageRecord]]:
        """Voyages grouped by vessel, each list ordered by sail date."""
        out: dict[str, list[VoyageRecord]] = {}
        for v in self.voyages:
            out.setdefault(v.vessel_id, []).append(v)
        for legs in out.values():
            legs.sort(key=lambda v: (v.sail_date, v.arrival_date, v.voyage_id))
        return dict(sorted(out.items()))

    @cached_property
    def digest(self) -> str:
        return dataset_hash(self)


def voyage_duration(v: VoyageRecord) -> float:
    """Days between sailing and arrival; fractional when timestamps carry a time."""
    delta = v.arrival_date - v.sail_date
    return delta.days + delta.seconds / 86400.0 + delta.microseconds / 86400e6


def _parse_when(text: str) -> datetime:
    text = text.strip()
    if len(text) == 10:
        return datetime.combine(date.fromisoformat(text), datetime.min.time())
    return datetime.fromisoformat(text)


def _format_when(dt: datetime) -> str:
    if dt.time() == datetime.min.time() and dt.tzinfo is None:
        return dt.date().isoformat()
    return dt.isoformat()


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "y"):
        return True
    if t in ("0", "false", "no", "n", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_float(text: str, name: str) -> float:
    try:
        x = float(text)
    except (TypeError, ValueError):
        raise ValueError(f"{name} is not a number: {text!r}") from None
    if not math.isfinite(x):
        raise ValueError(f"{name} is not finite: {text!r}")
    return x


def _read_csv(path: Path, columns: tuple[str, ...]) -> Iterable[tuple[int, dict[str, str]]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in columns if c not in header]
        if missing:
            raise MissingColumn(f"missing column(s) {', '.join(missing)}", file=str(path), line=1)
        for row in reader:
            yield reader.line_num, {k: (v or "").strip() for k, v in row.items() if k is not None}


def _parse_region(row: dict[str, str]) -> Region:
    if not row["region_id"]:
        raise ValueError("empty region_id")
    gdp = row["gdp_per_capita_usd"]
    gdp_value = None
    if gdp:
        gdp_value = _parse_float(gdp, "gdp_per_capita_usd")
        if gdp_value <= 0:
            raise ValueError(f"gdp_per_capita_usd must be > 0, got {gdp_value}")
    return Region(row["region_id"], row["region_name"], gdp_value,
                  _parse_bool(row["is_sids"]), _parse_bool(row["is_ldc"]))


def _parse_port(row: dict[str, str], regions: Mapping[str, Region]) -> PortRecord:
    if not row["port_id"]:
        raise ValueError("empty port_id")
    country = row["country"]
    if len(country) != 3 or not country.isalpha() or not country.isupper():
        raise ValueError(f"country must be an ISO-3166 alpha-3 code, got {country!r}")
    if row["region_id"] not in regions:
        raise ValueError(f"region_id {row['region_id']!r} not in region registry")
    lat = _parse_float(row["lat"], "lat")
    lon = _parse_float(row["lon"], "lon")
    if not -90 <= lat <= 90 or not -180 <= lon <= 180:
        raise ValueError(f"coordinates out of range: ({lat}, {lon})")
    temp = _parse_float(row["temperature_c"], "temperature_c")
    sal = _parse_float(row["salinity_ppt"], "salinity_ppt")
    if not TEMPERATURE_RANGE[0] <= temp <= TEMPERATURE_RANGE[1]:
        raise ValueError(f"temperature_c {temp} outside {TEMPERATURE_RANGE}")
    if not SALINITY_RANGE[0] <= sal <= SALINITY_RANGE[1]:
        raise ValueError(f"salinity_ppt {sal} outside {SALINITY_RANGE}")
    if not row["ecoregion_id"]:
        raise ValueError("empty ecoregion_id")
    return PortRecord(row["port_id"], row["name"], country, row["region_id"], lat, lon,
                      temp, sal, row["ecoregion_id"])


def _parse_voyage(row: dict[str, str]) -> VoyageRecord:
    if not row["voyage_id"] or not row["vessel_id"]:
        raise ValueError("empty voyage_id or vessel_id")
    if row["vessel_type"] not in VESSEL_TYPES:
        raise ValueError(f"vessel_type must be one of {VESSEL_TYPES}, got {row['vessel_type']!r}")
    dwt = _parse_float(row["dwt"], "dwt")
    discharge = _parse_float(row["discharge_tonnes"], "discharge_tonnes")
    if dwt <= 0:
        raise ValueError(f"dwt must be > 0, got {dwt}")
    if not 0 <= discharge <= dwt:
        raise ValueError(f"discharge_tonnes {discharge} outside [0, dwt={dwt}]")
    if row["origin_port"] == row["dest_port"]:
        raise ValueError(f"origin_port equals dest_port ({row['origin_port']})")
    try:
        sail = _parse_when(row["sail_date"])
        arrive = _parse_when(row["arrival_date"])
    except ValueError as exc:
        raise ValueError(f"bad date: {exc}") from None
    if arrive < sail:
        raise ValueError(f"arrival_date {row['arrival_date']} before sail_date {row['sail_date']}")
    return VoyageRecord(row["voyage_id"], row["vessel_id"], row["vessel_type"], dwt,
                        row["origin_port"], row["dest_port"], sail, arrive, discharge)


class _Collector:
    def __init__(self, strict: bool):
        self.strict = strict
        self.rejections: list[Rejection] = []

    def reject(self, exc_type: type[IngestError], path: Path, line: int, reason: str):
        if self.strict:
            raise exc_type(reason, file=str(path), line=line)
        rej = Rejection(str(path), line, reason, exc_type.__name__)
        log.warning("rejected %s", rej)
        self.rejections.append(rej)


def load_regions(path: str | Path, strict: bool = False, _collector: _Collector | None = None) -> tuple[Region, ...]:
    path = Path(path)
    col = _collector or _Collector(strict)
    out: dict[str, Region] = {}
    for line, row in _read_csv(path, REGION_COLUMNS):
        try:
            region = _parse_region(row)
        except ValueError as exc:
            col.reject(InvariantViolation, path, line, str(exc))
            continue
        if region.region_id in out:
            col.reject(InvariantViolation, path, line, f"duplicate region_id {region.region_id!r}")
            continue
        out[region.region_id] = region
    return tuple(out.values())


def load_adjacency(path: str | Path) -> EcoregionAdjacency:
    path = Path(path)
    pairs = []
    for line, row in _read_csv(path, ADJACENCY_COLUMNS):
        if not row["ecoregion_a"] or not row["ecoregion_b"]:
            raise InvariantViolation("empty ecoregion id", file=str(path), line=line)
        pairs.append((row["ecoregion_a"], row["ecoregion_b"]))
    return EcoregionAdjacency.from_pairs(pairs)


def load_dataset(
    ports_file: str | Path,
    voyages_file: str | Path,
    regions_file: str | Path,
    params_file: str | Path | None = None,
    adjacency_file: str | Path | None = None,
    strict: bool = False,
) -> Dataset:
    """Read and cross-validate the input tables.

    Ports must name a registered region; voyages must name known ports.
    Offending rows are dropped and listed in ``Dataset.report`` unless
    ``strict`` is set, in which case the first one raises.
    """
    col = _Collector(strict)
    regions = load_regions(regions_file, _collector=col)
    region_index = {r.region_id: r for r in regions}
    if not regions:
        raise EmptyDataset("no regions", file=str(regions_file))

    ports_path = Path(ports_file)
    ports: dict[str, PortRecord] = {}
    for line, row in _read_csv(ports_path, PORT_COLUMNS):
        try:
            port = _parse_port(row, region_index)
        except ValueError as exc:
            col.reject(InvariantViolation, ports_path, line, str(exc))
            continue
        if port.port_id in ports:
            col.reject(InvariantViolation, ports_path, line, f"duplicate port_id {port.port_id!r}")
            continue
        ports[port.port_id] = port
    if not ports:
        raise EmptyDataset("no valid ports", file=str(ports_path))

    voyages_path = Path(voyages_file)
    voyages: dict[str, VoyageRecord] = {}
    for line, row in _read_csv(voyages_path, VOYAGE_COLUMNS):
        unknown = [row[c] for c in ("origin_port", "dest_port") if row[c] not in ports]
        if unknown:
            col.reject(UnknownPort, voyages_path, line, f"unknown port(s) {', '.join(map(repr, unknown))}")
            continue
        try:
            voyage = _parse_voyage(row)
        except ValueError as exc:
            col.reject(InvariantViolation, voyages_path, line, str(exc))
            continue
        if voyage.voyage_id in voyages:
            col.reject(InvariantViolation, voyages_path, line, f"duplicate voyage_id {voyage.voyage_id!r}")
            continue
        voyages[voyage.voyage_id] = voyage
    if not voyages:
        raise EmptyDataset("no valid voyages", file=str(voyages_path))

    adjacency = load_adjacency(adjacency_file) if adjacency_file else EcoregionAdjacency()
    params = load_params(params_file) if params_file else MappingProxyType({})
    report = IngestReport(len(ports), len(voyages), len(regions), tuple(col.rejections))
    log.info("loaded %d ports, %d voyages, %d regions (%d rows rejected)",
             len(ports), len(voyages), len(regions), report.rejected)
    return Dataset(tuple(ports.values()), tuple(voyages.values()), regions, adjacency, params, report)


# ---------------------------------------------------------------------------
# writing
# ---------------------------------------------------------------------------


def _num(x: float) -> str:
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


def _write_rows(fh, columns, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)


def write_ports(fh, ports: Iterable[PortRecord]):
    _write_rows(fh, PORT_COLUMNS, (
        (p.port_id, p.name, p.country, p.region_id, _num(p.latitude), _num(p.longitude),
         _num(p.temperature), _num(p.salinity), p.ecoregion_id) for p in ports))


def write_voyages(fh, voyages: Iterable[VoyageRecord]):
    _write_rows(fh, VOYAGE_COLUMNS, (
        (v.voyage_id, v.vessel_id, v.vessel_type, _num(v.dwt), v.origin_port, v.dest_port,
         _format_when(v.sail_date), _format_when(v.arrival_date), _num(v.discharge_volume))
        for v in voyages))


def write_regions(fh, regions: Iterable[Region]):
    _write_rows(fh, REGION_COLUMNS, (
        (r.region_id, r.name, "" if r.gdp_per_capita is None else _num(r.gdp_per_capita),
         int(r.is_sids), int(r.is_ldc)) for r in regions))


def write_adjacency(fh, adjacency: EcoregionAdjacency):
    _write_rows(fh, ADJACENCY_COLUMNS, adjacency.sorted_pairs())


def write_dataset(ds: Dataset, out_dir: str | Path) -> dict[str, Path]:
    """Write ``ds`` as ports/voyages/regions/ecoregions CSVs (plus params.json if set)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "ports": out / "ports.csv",
        "voyages": out / "voyages.csv",
        "regions": out / "regions.csv",
        "ecoregions": out / "ecoregion_adjacency.csv",
    }
    with open(paths["ports"], "w", newline="") as fh:
        write_ports(fh, ds.ports)
    with open(paths["voyages"], "w", newline="") as fh:
        write_voyages(fh, ds.voyages)
    with open(paths["regions"], "w", newline="") as fh:
        write_regions(fh, ds.regions)
    with open(paths["ecoregions"], "w", newline="") as fh:
        write_adjacency(fh, ds.adjacency)
    if ds.params:
        paths["params"] = out / "params.json"
        paths["params"].write_text(json.dumps(dict(ds.params), indent=2, sort_keys=True) + "\n")
    return paths


def dataset_hash(ds: Dataset) -> str:
    """SHA-256 over a canonical serialisation; independent of row order."""
    h = hashlib.sha256()
    for writer, items in (
        (write_ports, sorted(ds.ports, key=lambda p: p.port_id)),
        (write_voyages, sorted(ds.voyages, key=lambda v: v.voyage_id)),
        (write_regions, sorted(ds.regions, key=lambda r: r.region_id)),
    ):
        buf = io.StringIO()
        writer(buf, items)
        h.update(buf.getvalue().encode())
    buf = io.StringIO()
    write_adjacency(buf, ds.adjacency)
    h.update(buf.getvalue().encode())
    h.update(json.dumps(dict(ds.params), sort_keys=True).encode())
    return h.hexdigest()


def default_region_registry() -> tuple[Region, ...]:
    """The 23 analysis regions shipped with the package (no GDP figures)."""
    path = Path(__file__).with_name("data") / "regions_default.csv"
    return load_regions(path, strict=True)
