import sys
import textwrap
from pathlib import Path

import pytest

from balhon.ingest import RiskParams

PORTS_CSV = """\
port_id,name,country,region_id,lat,lon,temperature_c,salinity_ppt,ecoregion_id
AAA,Alpha,USA,USA,40.7,-74.0,12.0,31.0,E1
BBB,Bravo,CHN,CHN,31.2,121.5,18.0,28.0,E2
CCC,Charlie,SGP,SGP,1.3,103.8,28.0,33.0,E3
"""

VOYAGES_CSV = """\
voyage_id,vessel_id,vessel_type,dwt,origin_port,dest_port,sail_date,arrival_date,discharge_tonnes
V1,S1,bulker,60000,AAA,BBB,2019-01-01,2019-01-11,20000
V2,S1,bulker,60000,BBB,CCC,2019-01-13,2019-01-20,15000
V3,S1,bulker,60000,CCC,AAA,2019-01-22,2019-02-10,0
V4,S2,tanker,90000,BBB,AAA,2019-03-01,2019-03-25,30000
V5,S2,tanker,90000,AAA,CCC,2019-03-27,2019-04-20,10000
"""

REGIONS_CSV = """\
region_id,region_name,gdp_per_capita_usd,is_sids,is_ldc
USA,USA,65000,0,0
CHN,China,10000,0,0
SGP,Singapore,60000,1,0
"""

ADJ_CSV = """\
ecoregion_a,ecoregion_b
E1,E2
"""


def write_fixture(root: Path, ports=PORTS_CSV, voyages=VOYAGES_CSV, regions=REGIONS_CSV, adjacency=ADJ_CSV,
                  params=None) -> dict:
    root.mkdir(parents=True, exist_ok=True)
    files = {
        "ports": root / "ports.csv",
        "voyages": root / "voyages.csv",
        "regions": root / "regions.csv",
        "ecoregions": root / "ecoregions.csv",
    }
    files["ports"].write_text(textwrap.dedent(ports))
    files["voyages"].write_text(textwrap.dedent(voyages))
    files["regions"].write_text(textwrap.dedent(regions))
    files["ecoregions"].write_text(textwrap.dedent(adjacency))
    if params is not None:
        files["params"] = root / "params.json"
        files["params"].write_text(params)
    return files


@pytest.fixture
def fixture_files(tmp_path):
    return write_fixture(tmp_path / "in")


@pytest.fixture
def unit_params():
    return RiskParams(establish_ceiling=1.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
