"""Risk reduction by region, untreated ballast against treated ballast.

Runs both scenarios on a synthetic dataset and prints the per-region table
together with the reduction and fold-change ranges.

    python scripts/convention_comparison.py --seed 1 --ports 50 --voyages 10000 --alpha 1e-3
"""

import argparse

from balhon.ingest import IMO_TREATMENT_EFFICACY, CostParams, RiskParams
from balhon.scenario import ScenarioConfig, compare_scenarios, reduction_range, run_scenario
from balhon.synth import SYNTH_DAILY_COST_USD, synth_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--ports", type=int, default=50)
    ap.add_argument("--voyages", type=int, default=10_000)
    ap.add_argument("--alpha", type=float, default=1e-3, help="establishment ceiling")
    ap.add_argument("--efficacy", type=float, default=IMO_TREATMENT_EFFICACY)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    ds = synth_dataset(args.seed, args.ports, args.voyages)
    base = ScenarioConfig("no_policy", RiskParams(establish_ceiling=args.alpha),
                          CostParams(daily_cost_usd=SYNTH_DAILY_COST_USD))
    treated = base.with_treatment(args.efficacy, "treated")
    report = compare_scenarios(run_scenario(ds, base, args.threads), run_scenario(ds, treated, args.threads),
                               ds.regions)

    print(f"{'region':8s} {'no policy':>12s} {'policy':>12s} {'reduction':>10s} {'fold':>8s}")
    for s in report.regions:
        print(f"{s.region_id:8s} {s.risk_no_policy:12.4e} {s.risk_policy:12.4e} "
              f"{100 * s.reduction_pct:9.3f}% {s.fold_change:8.1f}")
    lo, hi = reduction_range(report)
    folds = [s.fold_change for s in report.regions if s.risk_policy > 0]
    print(f"\nreduction {100 * lo:.3f}% to {100 * hi:.3f}%, fold change {min(folds):.1f} to {max(folds):.1f}")


if __name__ == "__main__":
    main()
