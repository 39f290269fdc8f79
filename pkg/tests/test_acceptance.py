"""Acceptance criteria, one check per criterion at its pinned tolerance.

Each criterion records a PASS/FAIL line; the lines are printed at the end of
the pytest run (see conftest.py) or by running this file directly.
"""

import itertools
import json
import math
import random
import sys
import time

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from balhon.aggregate import aggregate_pair_risk, cumulative_port_risk, port_risks, region_risk_summary
from balhon.cli import main
from balhon.cost import baseline_voyage_cost, cost_change_matrix, treatment_counts, voyage_compliance_cost
from balhon.hon import (
    HonParams,
    PathObservation,
    PhysicalAdjacency,
    build_hon_network,
    divergence_threshold,
    extract_paths,
    first_order_adjacency,
    flow_by_port,
    grow_rules,
    kl_divergence,
    project_physical,
)
from balhon.inequality import RegionDatum, lorenz_points
from balhon.ingest import CostParams, DischargeProfile, RiskParams, write_dataset
from balhon.report import write_cost_matrix_csv
from balhon.riskcore import LegContext, establish_probability, intro_probability, spread_probability
from balhon.scenario import ScenarioConfig, compare_scenarios, run_scenario
from balhon.synth import SYNTH_DAILY_COST_USD, synth_dataset

RESULTS: dict[int, list[tuple[bool, str]]] = {}
TITLES = {
    1: "kernel values",
    2: "treatment survival factor is linear",
    3: "aggregation matches inclusion-exclusion",
    4: "treatment efficacy bound, raw mode",
    5: "saturation lowers reduction of high-risk port",
    6: "rule order detection",
    7: "flow conservation under rewiring",
    8: "gini",
    9: "cost matrix",
    10: "end-to-end determinism and runtime",
}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS.setdefault(n, []).append((bool(ok), detail))
    assert ok, f"criterion {n}: {detail}"


def summary_lines() -> list[str]:
    lines = []
    for n in sorted(TITLES):
        if n not in RESULTS:
            lines.append(f"criterion {n:2d} NOT RUN  {TITLES[n]}")
            continue
        ok = all(r[0] for r in RESULTS[n])
        details = "; ".join(d for good, d in RESULTS[n] if not good) if not ok else \
            "; ".join(d for _, d in RESULTS[n])
        lines.append(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {TITLES[n]}: {details}")
    return lines


# ---------------------------------------------------------------------------
# 1. kernel values
# ---------------------------------------------------------------------------

mpmath.mp.dps = 50
LITERAL_INTRO = 0.121772


def intro_oracle(discharge, days):
    lam, mu = mpmath.mpf("3.22e-6"), mpmath.mpf("0.02")
    return float((1 - mpmath.exp(-lam * discharge)) * mpmath.exp(-mu * days))


def _ctx(D=50_000.0, dt=10.0, dT=0.0, dS=0.0, near=False, alpha=1.0, rho=1.0):
    return LegContext(D, dt, dT, dS, near, RiskParams(establish_ceiling=alpha, survival_factor=rho))


def test_c1_intro_against_oracle():
    got, want = intro_probability(_ctx()), intro_oracle(50_000, 10)
    record(1, abs(got - want) <= 1e-6, f"intro={got:.10f} vs high-precision {want:.10f} (tol 1e-6)")


def test_c1_intro_against_stated_value():
    # the stated 0.121772 disagrees with the high-precision oracle by 2.0e-5
    got = intro_probability(_ctx())
    record(1, abs(got - LITERAL_INTRO) <= 1e-6, f"intro={got:.10f} vs stated {LITERAL_INTRO} (tol 1e-6)")


def test_c1_establish():
    got = establish_probability(_ctx(dT=2.0, dS=10.0))
    record(1, abs(got - math.exp(-1)) <= 1e-12, f"establish={got:.15f} vs e^-1 (tol 1e-12)")


def test_c1_compliance_cost():
    from datetime import datetime
    from balhon.ingest import VoyageRecord
    v = VoyageRecord("v", "s", "bulker", 1e5, "A", "B", datetime(2019, 1, 1), datetime(2019, 1, 2), 20_000.0)
    got = voyage_compliance_cost(v, 50, CostParams())
    record(1, got == 3950.0, f"compliance={got!r} vs 3950 exactly")


# ---------------------------------------------------------------------------
# 2. survival factor linearity
# ---------------------------------------------------------------------------


def test_c2_rho_linearity():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(1000):
        D, dt = rng.uniform(0, 5e5), rng.uniform(0, 120)
        dT, dS, alpha = rng.uniform(0, 40), rng.uniform(0, 45), rng.uniform(1e-3, 1.0)
        near = bool(rng.random() < 0.1)
        treated = spread_probability(_ctx(D, dt, dT, dS, near, alpha, 0.0085))
        untreated = spread_probability(_ctx(D, dt, dT, dS, near, alpha, 1.0))
        expect = 0.0085 * untreated
        rel = abs(treated - expect) / expect if expect else abs(treated)
        worst = max(worst, rel)
    record(2, worst <= 1e-15, f"max relative deviation {worst:.1e} over 1000 contexts (tol 1e-15)")


# ---------------------------------------------------------------------------
# 3. aggregation oracle
# ---------------------------------------------------------------------------


def inclusion_exclusion(ps):
    return math.fsum((-1) ** (k + 1) * math.prod(sub)
                     for k in range(1, len(ps) + 1) for sub in itertools.combinations(ps, k))


def test_c3_aggregation_oracle():
    rng = np.random.default_rng(3)
    grid = [0.0, 1e-9, 1e-4, 0.01, 0.1, 0.5, 0.9, 0.999, 1.0]
    worst, n = 0.0, 0
    for size in range(0, 11):
        for _ in range(200):
            if rng.random() < 0.5:
                ps = [float(x) for x in rng.choice(grid, size)]
            else:
                ps = [float(x) for x in rng.uniform(0, 1, size)]
            want = inclusion_exclusion(ps)
            worst = max(worst, abs(aggregate_pair_risk(ps) - want), abs(cumulative_port_risk(ps) - want))
            n += 1
    record(3, worst <= 1e-12, f"max abs deviation {worst:.1e} over {n} route sets of size 0-10 (tol 1e-12)")


# ---------------------------------------------------------------------------
# 4. efficacy bound
# ---------------------------------------------------------------------------


def test_c4_efficacy_bound():
    lo_all, hi_all, max_edge = 1.0, 0.0, 0.0
    for seed in (1, 2, 3):
        ds = synth_dataset(seed, 30, 3000)
        # the establishment ceiling caps every path weight, keeping each route risk under 1e-3
        cost = CostParams(daily_cost_usd=SYNTH_DAILY_COST_USD)
        base = ScenarioConfig("no_policy", RiskParams(establish_ceiling=1e-3), cost, normalization="raw")
        treated = ScenarioConfig("imo", RiskParams(establish_ceiling=1e-3, survival_factor=0.0085), cost,
                                 normalization="raw")
        a, b = run_scenario(ds, base), run_scenario(ds, treated)
        max_edge = max(max_edge, float(a.adjacency.matrix.max()))
        report = compare_scenarios(a, b, ds.regions)
        reds = [s.reduction_pct for s in report.regions if s.risk_no_policy > 0]
        assert reds
        lo_all, hi_all = min(lo_all, *reds), max(hi_all, *reds)
    ok = max_edge <= 1e-3 and 0.9910 <= lo_all and hi_all <= 0.9915
    record(4, ok, f"reductions in [{lo_all:.6f}, {hi_all:.6f}], bound [0.9910, 0.9915]; "
                  f"largest route risk {max_edge:.1e} (must be <= 1e-3)")


# ---------------------------------------------------------------------------
# 5. saturation
# ---------------------------------------------------------------------------


def _two_port_reductions(ps):
    sources = [f"S{i:02d}" for i in range(len(ps))]
    ports = tuple(sources) + ("HIGH", "LOW")
    n = len(ports)

    def adjacency(scale):
        m = np.zeros((n, n))
        for i, p in enumerate(ps):
            m[i, n - 2] = min(20 * p * scale, 1.0)
            m[i, n - 1] = p * scale
        return PhysicalAdjacency(ports, m)

    none, policy = port_risks(adjacency(1.0)), port_risks(adjacency(0.0085))
    regions = {p: p for p in ports}
    only = ["HIGH", "LOW"]
    summary = region_risk_summary({p: none[p] for p in only}, {p: policy[p] for p in only}, regions)
    return {s.region_id: s.reduction_pct for s in summary}


_saturation_failures = []


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(1e-3, 0.05), min_size=2, max_size=12))
def _saturation_property(ps):
    red = _two_port_reductions(ps)
    if not red["HIGH"] < red["LOW"]:
        _saturation_failures.append((ps, red))
    assert red["HIGH"] < red["LOW"]


def test_c5_saturation():
    try:
        _saturation_property()
    except AssertionError:
        pass
    example = _two_port_reductions([0.01, 0.02, 0.03])
    ok = not _saturation_failures
    record(5, ok, f"300 random route sets, high-risk reduction strictly lower in all"
                  if ok else f"counterexample {_saturation_failures[0]}")
    record(5, example["HIGH"] < example["LOW"],
           f"example HIGH {example['HIGH']:.6f} < LOW {example['LOW']:.6f}")


# ---------------------------------------------------------------------------
# 6. order detection
# ---------------------------------------------------------------------------


def test_c6_order_detection():
    t0 = time.perf_counter()
    corpus = [PathObservation(("A", "B", "C"), 1.0)] * 10 + [PathObservation(("D", "B", "E"), 1.0)] * 10
    higher = {(r.context, r.next_port): r.probability for r in grow_rules(corpus) if r.order > 1}
    ok_corpus = set(higher) == {(("A", "B"), "C"), (("D", "B"), "E")} and \
        all(abs(p - 1.0) <= 1e-9 for p in higher.values())

    rnd = random.Random(11)
    memoryless = []
    for _ in range(10_000):
        seq = [rnd.choice("ABCD")]
        for _ in range(rnd.randint(1, 3)):
            seq.append(rnd.choice([p for p in "ABCD" if p != seq[-1]]))
        memoryless.append(PathObservation(tuple(seq), 1.0))
    n_high = sum(r.order > 1 for r in grow_rules(memoryless))
    # cross-check with a plain counting oracle against the order-1 distribution
    oracle_high = 0
    support: dict[tuple, dict[str, float]] = {}
    for p in memoryless:
        s = p.port_sequence
        for k in (1, 2, 3):
            for t in range(k, len(s)):
                support.setdefault(s[t - k:t], {}).setdefault(s[t], 0.0)
                support[s[t - k:t]][s[t]] += p.weight
    for ctx, nxt in support.items():
        total = sum(nxt.values())
        if len(ctx) > 1 and total >= 5:
            parent = support[ctx[-1:]]
            ptotal = sum(parent.values())
            d = kl_divergence({k: v / total for k, v in nxt.items()}, {k: v / ptotal for k, v in parent.items()})
            oracle_high += d > divergence_threshold(len(ctx), total)

    ds = synth_dataset(6, 20, 2000)
    paths = extract_paths(ds, DischargeProfile(), RiskParams(establish_ceiling=1.0))
    ports = [p.port_id for p in ds.ports]
    via_rules = project_physical(build_hon_network(grow_rules(paths, HonParams(max_order=1))), ports)
    diff = float(np.max(np.abs(via_rules.matrix - first_order_adjacency(paths, ports).matrix)))
    elapsed = time.perf_counter() - t0

    record(6, ok_corpus, f"second-order corpus rules {sorted(higher)}")
    record(6, n_high == 0 and oracle_high == 0,
           f"memoryless corpus: {n_high} rules above order 1, oracle {oracle_high}")
    record(6, diff <= 1e-12, f"max_order=1 vs first-order adjacency max diff {diff:.1e} (tol 1e-12)")
    record(6, elapsed < 10, f"runtime {elapsed:.2f} s (< 10 s)")


# ---------------------------------------------------------------------------
# 7. flow conservation
# ---------------------------------------------------------------------------


def test_c7_flow_conservation():
    rng = np.random.default_rng(7)
    worst, with_higher = 0.0, 0
    for seed in range(100):
        ds = synth_dataset(seed, int(rng.integers(4, 16)), int(rng.integers(100, 600)))
        paths = extract_paths(ds, DischargeProfile(), RiskParams(establish_ceiling=1.0))
        rules = grow_rules(paths, HonParams(support="count"))
        with_higher += any(r.order > 1 for r in rules)
        hon = build_hon_network(rules)
        before, after = flow_by_port(hon.first_order_edges), flow_by_port(hon.edges)
        assert before.keys() == after.keys()
        worst = max([worst] + [abs(before[p] - after[p]) for p in before])
    record(7, worst <= 1e-9, f"max per-port outgoing weight change {worst:.1e} over 100 datasets "
                             f"({with_higher} with higher-order rules; tol 1e-9)")


# ---------------------------------------------------------------------------
# 8. gini
# ---------------------------------------------------------------------------


def pairwise_gini(xs):
    n = len(xs)
    return sum(abs(a - b) for a in xs for b in xs) / (2 * n * n * (sum(xs) / n))


def _regions(metrics, incomes=None):
    incomes = incomes or [1.0] * len(metrics)
    return [RegionDatum(f"R{i:02d}", inc, m) for i, (inc, m) in enumerate(zip(incomes, metrics))]


def test_c8_gini():
    rng = np.random.default_rng(8)
    worst_oracle = worst_scale = 0.0
    for _ in range(500):
        xs = [float(x) for x in rng.exponential(1.0, int(rng.integers(2, 13)))]
        g = lorenz_points(_regions(xs)).gini
        worst_oracle = max(worst_oracle, abs(g - pairwise_gini(xs)))
        incomes = [float(x) for x in rng.uniform(0.5, 50, len(xs))]
        g2 = lorenz_points(_regions(xs, incomes)).gini
        k = float(10 ** rng.uniform(-3, 3))
        worst_scale = max(worst_scale, abs(lorenz_points(_regions([k * x for x in xs], incomes)).gini - g2))
    diagonal = lorenz_points(_regions([2.0, 4.0, 6.0], [1.0, 2.0, 3.0])).gini
    two = lorenz_points(_regions([0.0, 1.0])).gini
    record(8, worst_oracle <= 1e-9, f"pairwise oracle max diff {worst_oracle:.1e} (tol 1e-9)")
    record(8, abs(diagonal) <= 1e-12, f"diagonal gini {diagonal:.1e}")
    record(8, abs(two - 0.5) <= 1e-12, f"{{0,1}} gini {two!r}")
    record(8, worst_scale <= 1e-12, f"scale invariance max diff {worst_scale:.1e} (tol 1e-12)")


# ---------------------------------------------------------------------------
# 9. cost matrix
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("size", [(25, 2000, None), (40, 200, 12)], ids=["dense", "sparse"])
def test_c9_cost_matrix(size):
    import io
    ds = synth_dataset(9, *size)
    cp = CostParams(daily_cost_usd=SYNTH_DAILY_COST_USD)
    m = cost_change_matrix(ds, cp)
    n = treatment_counts(ds)
    region = {p.port_id: p.region_id for p in ds.ports}
    legs: dict[tuple[str, str], list] = {}
    for v in ds.voyages:
        legs.setdefault((region[v.origin_port], region[v.dest_port]), []).append(v)
    worst = 0.0
    for key, vs in legs.items():
        base = math.fsum(baseline_voyage_cost(v, cp) for v in vs)
        comp = math.fsum(voyage_compliance_cost(v, n[v.vessel_id], cp) for v in vs)
        worst = max(worst, abs(m[key].baseline_usd - base) / base, abs(m[key].compliance_usd - comp) / comp)

    doubled = cost_change_matrix(ds, cp.scaled(2.0))
    homogeneous = all(doubled[k].compliance_usd == 2 * m[k].compliance_usd
                      and doubled[k].pct_change == 2 * m[k].pct_change for k in m)

    all_pairs = {(a.region_id, b.region_id) for a in ds.regions for b in ds.regions}
    quiet = all_pairs - set(legs)
    buf = io.StringIO()
    write_cost_matrix_csv(m, buf)
    rows = {tuple(line.split(",")[:2]) for line in buf.getvalue().splitlines()[1:]}
    blank = set(m) == set(legs) and not (rows & quiet) and len(rows) == len(m)
    if size[2] is not None:
        blank &= bool(quiet)

    record(9, worst <= 1e-9, f"additivity max relative error {worst:.1e} (tol 1e-9)")
    record(9, homogeneous, "doubling C, O and T doubles every compliance cost and change exactly")
    record(9, blank, f"{len(quiet)} region pairs without traffic absent from the matrix")


# ---------------------------------------------------------------------------
# 10. end to end
# ---------------------------------------------------------------------------

OUTPUTS = ("region_risk.csv", "cost_matrix.csv", "lorenz.csv", "manifest.json")


def test_c10_end_to_end(tmp_path):
    data = tmp_path / "data"
    ds = synth_dataset(1, 50, 10_000)
    write_dataset(ds, data)
    scenario = data / "scenario.json"
    scenario.write_text(json.dumps({"name": "no_policy", "risk": {"establish_ceiling": 1.0}}))
    counted = data / "scenario_count.json"
    counted.write_text(json.dumps({"name": "no_policy_count", "risk": {"establish_ceiling": 1.0},
                                   "hon": {"support": "count"}}))

    timings, identical = {}, True
    for scen in (scenario, counted):
        outs = {}
        for threads in (1, 2, 8):
            out = tmp_path / f"{scen.stem}_{threads}"
            t0 = time.perf_counter()
            code = main(["run", "--ports", str(data / "ports.csv"), "--voyages", str(data / "voyages.csv"),
                         "--regions", str(data / "regions.csv"), "--params", str(data / "params.json"),
                         "--ecoregions", str(data / "ecoregion_adjacency.csv"), "--scenario", str(scen),
                         "--out", str(out), "--threads", str(threads)])
            timings[scen.stem, threads] = time.perf_counter() - t0
            assert code == 0
            outs[threads] = {f: (out / f).read_bytes() for f in OUTPUTS}
        identical &= outs[1] == outs[2] == outs[8]
    slowest = max(timings.values())
    record(10, identical, "outputs byte-identical across 1, 2 and 8 threads (weight and count support)")
    record(10, slowest < 60, f"slowest run {slowest:.2f} s (< 60 s)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
