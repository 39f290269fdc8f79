"""Command line: ``balhon run | synth | gini | validate``.

Exit status is 0 on success, 1 for bad input or usage, 2 for anything else.
Every flag can also come from ``--config FILE.json``, keyed by the long flag
name (``"metric-col"`` or ``"metric_col"``); flags on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .hon import DanglingRule
from .inequality import DegenerateInput, lorenz_points, region_data, write_lorenz_csv, RegionDatum
from .ingest import IMO_TREATMENT_EFFICACY, IngestError, load_dataset, write_dataset
from .report import write_cost_matrix_csv, write_manifest, write_region_risk_csv
from .scenario import DatasetMismatch, ScenarioConfig, compare_scenarios, run_scenario
from .synth import synth_dataset

log = logging.getLogger("balhon")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _default_threads() -> int:
    env = os.environ.get("BALHON_THREADS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="balhon", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"balhon {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON file with default flag values")
        p.add_argument("--threads", type=int, default=None, help="worker threads (env BALHON_THREADS)")

    def inputs(p):
        p.add_argument("--ports")
        p.add_argument("--voyages")
        p.add_argument("--regions")
        p.add_argument("--params", help="params.json with default model parameters")
        p.add_argument("--ecoregions", help="CSV of neighbouring ecoregion pairs")
        p.add_argument("--strict", action="store_true", default=None, help="fail on the first rejected row")

    run = sub.add_parser("run", help="run a scenario (and a comparison) and write the report bundle")
    inputs(run)
    run.add_argument("--scenario", help="baseline scenario JSON")
    run.add_argument("--compare", help="treated scenario JSON; defaults to the baseline with Convention treatment")
    run.add_argument("--out", default=None)
    common(run)

    synth = sub.add_parser("synth", help="write a seeded synthetic dataset")
    synth.add_argument("--seed", type=int)
    synth.add_argument("--ports", type=int, dest="n_ports")
    synth.add_argument("--voyages", type=int, dest="n_voyages")
    synth.add_argument("--regions", type=int, dest="n_regions", default=None)
    synth.add_argument("--out")
    common(synth)

    gini = sub.add_parser("gini", help="Lorenz curve and Gini coefficient of a metric against income")
    gini.add_argument("--data")
    gini.add_argument("--metric-col")
    gini.add_argument("--income-col")
    gini.add_argument("--id-col", default=None)
    gini.add_argument("--sort", choices=("intensity", "income"), default=None)
    gini.add_argument("--out", default=None, help="path of lorenz.csv (default ./lorenz.csv)")
    common(gini)

    validate = sub.add_parser("validate", help="load and check input files, report rejected rows")
    inputs(validate)
    common(validate)
    return parser


def _flag_dests(parser: argparse.ArgumentParser, command: str) -> dict[str, str]:
    # config keys are long flag names, so ``--ports`` of synth maps to ``n_ports``
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[command]
    return {opt[2:]: a.dest for a in sub._actions for opt in a.option_strings
            if opt.startswith("--") and a.dest not in ("help", "config")}


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.error("a command is required")
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            config = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {config_path}: {exc}") from None
        dests = _flag_dests(parser, args.command)
        for key, value in config.items():
            dest = dests.get(key.replace("_", "-"))
            if dest is None:
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            if getattr(args, dest) is None:
                setattr(args, dest, value)
    if getattr(args, "threads", None) is None:
        args.threads = _default_threads()
    if getattr(args, "strict", None) is None:
        args.strict = False
    return args


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"balhon {args.command}: missing required argument(s): {flags}")


def _load(args):
    return load_dataset(args.ports, args.voyages, args.regions, args.params, args.ecoregions, strict=args.strict)


def cmd_run(args) -> int:
    _require(args, "ports", "voyages", "regions", "scenario")
    dataset = _load(args)
    base = ScenarioConfig.load(args.scenario, dataset.params)
    if args.compare:
        treated = ScenarioConfig.load(args.compare, dataset.params)
        treated_origin = Path(args.compare).name
    else:
        treated = base.with_treatment(IMO_TREATMENT_EFFICACY, name=f"{base.name}+imo_bwm")
        treated_origin = f"baseline with treatment efficacy {IMO_TREATMENT_EFFICACY}"
    out = Path(args.out or "balhon_out")
    out.mkdir(parents=True, exist_ok=True)

    res_a = run_scenario(dataset, base, threads=args.threads)
    res_b = run_scenario(dataset, treated, threads=args.threads)
    report = compare_scenarios(res_a, res_b, registry=dataset.regions)

    outputs = ["region_risk.csv", "cost_matrix.csv"]
    with open(out / "region_risk.csv", "w", newline="") as fh:
        write_region_risk_csv(report.regions, fh)
    with open(out / "cost_matrix.csv", "w", newline="") as fh:
        write_cost_matrix_csv(res_a.cost_matrix, fh)

    notes = []
    gdp = {r.region_id: r.gdp_per_capita for r in dataset.regions}
    data = [RegionDatum(s.region_id, gdp[s.region_id], s.risk_no_policy - s.risk_policy)
            for s in report.regions if gdp.get(s.region_id)]
    try:
        curve = lorenz_points(data)
    except DegenerateInput as exc:
        notes.append(f"lorenz.csv not written: {exc}")
    else:
        with open(out / "lorenz.csv", "w", newline="") as fh:
            write_lorenz_csv(curve, fh)
        outputs.append("lorenz.csv")
    outputs.append("manifest.json")

    write_manifest(out / "manifest.json", {
        "command": "run",
        "dataset_hash": dataset.digest,
        "inputs": {k: Path(v).name for k, v in (
            ("ports", args.ports), ("voyages", args.voyages), ("regions", args.regions),
            ("params", args.params), ("ecoregions", args.ecoregions), ("scenario", args.scenario),
            ("compare", args.compare)) if v},
        "ingest": {"ports": dataset.report.ports_kept, "voyages": dataset.report.voyages_kept,
                   "regions": dataset.report.regions_kept, "rejected": dataset.report.rejected},
        "scenarios": {
            "baseline": {"config": base.to_dict(), "config_hash": base.digest,
                         "paths": res_a.n_paths, "rules_by_order": {str(k): v for k, v in res_a.rule_orders.items()}},
            "treated": {"config": treated.to_dict(), "config_hash": treated.digest, "origin": treated_origin,
                        "paths": res_b.n_paths, "rules_by_order": {str(k): v for k, v in res_b.rule_orders.items()}},
        },
        "lorenz_metric": "risk_no_policy - risk_policy against gdp_per_capita_usd",
        "outputs": outputs,
        "notes": notes,
    })
    for s in report.regions:
        print(f"{s.region_id}\t{s.risk_no_policy:.6e}\t{s.risk_policy:.6e}\t{s.reduction_pct:.6f}\t{s.fold_change:.6f}")
    return 0


def cmd_synth(args) -> int:
    _require(args, "seed", "n_ports", "n_voyages", "out")
    if args.n_ports < 2:
        raise UsageError(f"--ports must be >= 2, got {args.n_ports}")
    if args.n_voyages < 1:
        raise UsageError(f"--voyages must be >= 1, got {args.n_voyages}")
    ds = synth_dataset(args.seed, args.n_ports, args.n_voyages, args.n_regions)
    paths = write_dataset(ds, args.out)
    # starter scenarios; establish_ceiling=1.0 is a placeholder, not a calibrated value
    for name, survival in (("no_policy", 1.0), ("imo_bwm", round(1 - IMO_TREATMENT_EFFICACY, 10))):
        scenario = {"name": name, "risk": {"establish_ceiling": 1.0, "survival_factor": survival}}
        paths[f"scenario_{name}"] = Path(args.out) / f"scenario_{name}.json"
        paths[f"scenario_{name}"].write_text(json.dumps(scenario, indent=2, sort_keys=True) + "\n")
    for p in paths.values():
        print(p)
    return 0


def cmd_gini(args) -> int:
    _require(args, "data", "metric_col", "income_col")
    with open(args.data, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and (args.metric_col not in rows[0] or args.income_col not in rows[0]):
        raise IngestError(f"columns {args.metric_col!r} and {args.income_col!r} required", file=args.data, line=1)
    try:
        data = region_data(rows, args.metric_col, args.income_col, args.id_col)
    except ValueError as exc:
        raise IngestError(str(exc), file=args.data) from None
    curve = lorenz_points(data, sort=args.sort or "intensity")
    out = Path(args.out or "lorenz.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        write_lorenz_csv(curve, fh)
    print(f"{curve.gini:.6f}")
    return 0


def cmd_validate(args) -> int:
    _require(args, "ports", "voyages", "regions")
    ds = _load(args)
    rep = ds.report
    print(f"ports {rep.ports_kept}\tvoyages {rep.voyages_kept}\tregions {rep.regions_kept}\trejected {rep.rejected}")
    for r in rep.rejections:
        print(f"rejected\t{r}")
    return 0


COMMANDS = {"run": cmd_run, "synth": cmd_synth, "gini": cmd_gini, "validate": cmd_validate}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (IngestError, DatasetMismatch, DegenerateInput, DanglingRule, FileNotFoundError) as exc:
        print(f"balhon {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        log.exception("internal error")
        print(f"balhon {args.command}: internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
