"""Why per-scenario normalization hides a uniform treatment effect.

Dividing each scenario's pair risks by that scenario's own maximum cancels a
survival factor applied to every route alike, so the "reduction" collapses
to roughly zero. Raw mode keeps the effect.
"""

import argparse

from balhon.ingest import CostParams, RiskParams
from balhon.scenario import ScenarioConfig, compare_scenarios, reduction_range, run_scenario
from balhon.synth import SYNTH_DAILY_COST_USD, synth_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--ports", type=int, default=30)
    ap.add_argument("--voyages", type=int, default=3000)
    ap.add_argument("--alpha", type=float, default=1e-3)
    args = ap.parse_args()

    ds = synth_dataset(args.seed, args.ports, args.voyages)
    cost = CostParams(daily_cost_usd=SYNTH_DAILY_COST_USD)
    for mode in ("raw", "per_scenario"):
        base = ScenarioConfig(f"none_{mode}", RiskParams(establish_ceiling=args.alpha), cost, normalization=mode)
        report = compare_scenarios(run_scenario(ds, base), run_scenario(ds, base.with_treatment()))
        lo, hi = reduction_range(report)
        print(f"{mode:13s} reduction {100 * lo:8.3f}% to {100 * hi:8.3f}%")


if __name__ == "__main__":
    main()
