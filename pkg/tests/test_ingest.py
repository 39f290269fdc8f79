from datetime import date, datetime

import pytest

from balhon.ingest import (
    CostParams,
    DischargeProfile,
    EmptyDataset,
    InvariantViolation,
    MissingColumn,
    ParamsError,
    RiskParams,
    UnknownPort,
    VoyageRecord,
    dataset_hash,
    default_region_registry,
    load_dataset,
    voyage_duration,
    write_dataset,
)
from balhon.synth import synth_dataset

from conftest import PORTS_CSV, VOYAGES_CSV, write_fixture


def _load(files, **kw):
    return load_dataset(files["ports"], files["voyages"], files["regions"], files.get("params"),
                        files.get("ecoregions"), **kw)


def test_fixture_round_trip(fixture_files):
    ds = _load(fixture_files)
    assert len(ds.ports) == 3
    assert len(ds.voyages) == 5
    assert ds.report.rejected == 0
    assert ds.port("BBB").temperature == 18.0
    assert ds.adjacency.same_or_neighbor("E2", "E1")
    assert not ds.adjacency.same_or_neighbor("E1", "E3")


def test_loading_twice_gives_equal_datasets(fixture_files):
    assert _load(fixture_files) == _load(fixture_files)
    assert dataset_hash(_load(fixture_files)) == dataset_hash(_load(fixture_files))


def test_unknown_port_strict_names_row(tmp_path):
    files = write_fixture(tmp_path, voyages=VOYAGES_CSV + "V6,S3,other,1000,AAA,ZZZ,2019-05-01,2019-05-02,0\n")
    with pytest.raises(UnknownPort) as exc:
        _load(files, strict=True)
    assert exc.value.line == 7
    assert "ZZZ" in str(exc.value)


def test_unknown_port_lenient_is_reported(tmp_path):
    files = write_fixture(tmp_path, voyages=VOYAGES_CSV + "V6,S3,other,1000,AAA,ZZZ,2019-05-01,2019-05-02,0\n")
    ds = _load(files)
    assert len(ds.voyages) == 5
    (rej,) = ds.report.rejections
    assert rej.error == "UnknownPort"
    assert rej.line == 7


def test_arrival_before_sail(tmp_path):
    files = write_fixture(tmp_path, voyages=VOYAGES_CSV + "V6,S3,other,1000,AAA,BBB,2019-05-03,2019-05-02,0\n")
    with pytest.raises(InvariantViolation, match="before sail_date"):
        _load(files, strict=True)
    assert _load(files).report.rejections[0].error == "InvariantViolation"


@pytest.mark.parametrize("row, reason", [
    ("V6,S3,other,1000,AAA,AAA,2019-05-01,2019-05-02,0", "origin_port equals"),
    ("V6,S3,other,1000,AAA,BBB,2019-05-01,2019-05-02,2000", "discharge_tonnes"),
    ("V6,S3,other,1000,AAA,BBB,2019-05-01,2019-05-02,-1", "discharge_tonnes"),
    ("V6,S3,barge,1000,AAA,BBB,2019-05-01,2019-05-02,0", "vessel_type"),
    ("V1,S3,other,1000,AAA,BBB,2019-05-01,2019-05-02,0", "duplicate voyage_id"),
])
def test_voyage_invariants(tmp_path, row, reason):
    files = write_fixture(tmp_path, voyages=VOYAGES_CSV + row + "\n")
    ds = _load(files)
    assert len(ds.voyages) == 5
    assert reason in ds.report.rejections[0].reason


@pytest.mark.parametrize("row, reason", [
    ("DDD,Delta,USA,USA,0,0,50,30,E1", "temperature_c"),
    ("DDD,Delta,USA,USA,0,0,10,46,E1", "salinity_ppt"),
    ("DDD,Delta,USA,XXX,0,0,10,30,E1", "region registry"),
    ("AAA,Dup,USA,USA,0,0,10,30,E1", "duplicate port_id"),
    ("DDD,Delta,us,USA,0,0,10,30,E1", "alpha-3"),
])
def test_port_invariants(tmp_path, row, reason):
    files = write_fixture(tmp_path, ports=PORTS_CSV + row + "\n")
    ds = _load(files)
    assert len(ds.ports) == 3
    assert reason in ds.report.rejections[0].reason


def test_missing_column(tmp_path):
    files = write_fixture(tmp_path, ports=PORTS_CSV.replace("salinity_ppt", "salinity"))
    with pytest.raises(MissingColumn, match="salinity_ppt"):
        _load(files)


def test_empty_voyages(tmp_path):
    files = write_fixture(tmp_path, voyages=VOYAGES_CSV.splitlines()[0] + "\n")
    with pytest.raises(EmptyDataset):
        _load(files)


def test_params_file_unknown_key_rejected(tmp_path):
    files = write_fixture(tmp_path, params='{"alpha": 0.5, "gamma": 1}')
    with pytest.raises(ParamsError, match="gamma"):
        _load(files)


def test_params_file_aliases(tmp_path):
    files = write_fixture(tmp_path, params='{"alpha": 0.5, "rho": 0.0085, "daily_cost_usd": {"bulker": 1}}')
    ds = _load(files)
    assert ds.params["alpha"] == 0.5


def _voyage(sail, arrive):
    return VoyageRecord("v", "s", "bulker", 1.0, "A", "B", sail, arrive, 0.0)


def test_voyage_duration_examples():
    assert voyage_duration(_voyage(datetime(2019, 1, 1), datetime(2019, 1, 11))) == 10
    assert voyage_duration(_voyage(datetime(2019, 1, 1), datetime(2019, 1, 1))) == 0
    # calendar oracle: proleptic ordinal difference across the year boundary
    expected = date(2019, 1, 4).toordinal() - date(2018, 12, 25).toordinal()
    assert expected == 10
    assert voyage_duration(_voyage(datetime(2018, 12, 25), datetime(2019, 1, 4))) == expected


def test_fractional_duration_from_timestamps(tmp_path):
    files = write_fixture(tmp_path, voyages=VOYAGES_CSV + "V6,S3,other,1000,AAA,BBB,2019-05-01T00:00,2019-05-02T12:00,0\n")
    ds = _load(files, strict=True)
    v6 = next(v for v in ds.voyages if v.voyage_id == "V6")
    assert voyage_duration(v6) == 1.5


def test_risk_params_validation():
    with pytest.raises(TypeError):
        RiskParams()  # the establishment ceiling has no default
    with pytest.raises(ParamsError):
        RiskParams(establish_ceiling=0.0)
    with pytest.raises(ParamsError):
        RiskParams(establish_ceiling=1.0, survival_factor=1.5)
    p = RiskParams(establish_ceiling=0.3)
    assert (p.intro_potential, p.mortality_rate, p.temp_tolerance, p.salinity_tolerance) == (3.22e-6, 0.02, 2.0, 10.0)


def test_cost_params_defaults():
    cp = CostParams()
    assert (cp.annual_capital_usd, cp.annual_operating_usd, cp.per_tonne_treatment_usd) == (49_000, 13_500, 0.135)


def test_discharge_profile_truncation():
    prof = DischargeProfile()
    assert prof.truncated(3) == (0.5, 0.3, 0.2)
    assert prof.truncated(2) == pytest.approx((0.625, 0.375), abs=1e-15)
    assert prof.truncated(1) == (1.0,)
    with pytest.raises(ParamsError):
        DischargeProfile((0.7, 0.5))


def test_default_registry_has_23_regions():
    regions = default_region_registry()
    assert len(regions) == 23
    assert {"SGP", "MUS", "USA", "SLAF", "XAS"} <= {r.region_id for r in regions}


class TestSynth:
    def test_passes_validation(self, tmp_path):
        ds = synth_dataset(1, 10, 100)
        paths = write_dataset(ds, tmp_path)
        loaded = load_dataset(paths["ports"], paths["voyages"], paths["regions"], paths["params"],
                              paths["ecoregions"], strict=True)
        assert loaded == ds
        assert loaded.digest == ds.digest

    def test_deterministic(self):
        assert synth_dataset(1, 10, 100) == synth_dataset(1, 10, 100)

    def test_seed_changes_voyages(self):
        assert synth_dataset(1, 10, 100).voyages != synth_dataset(2, 10, 100).voyages

    def test_spread(self):
        ds = synth_dataset(3, 10, 100)
        assert len({p.ecoregion_id for p in ds.ports}) >= 2
        assert len({p.region_id for p in ds.ports}) >= 2
        assert len(ds.voyages) == 100

    def test_two_ports(self):
        ds = synth_dataset(5, 2, 20)
        assert len({p.region_id for p in ds.ports}) == 2

    def test_rejects_one_port(self):
        with pytest.raises(ValueError):
            synth_dataset(1, 1, 10)
