"""``campaign-forge`` command line.

Every subcommand is a thin wrapper over one library call. Scenario inputs
come from ``--scenario FILE`` or ``--preset NAME`` (default ``reference``),
with ``--set path=value`` overrides applied on top.

Exit status is 0 on success, 1 when inputs are rejected and 2 on usage
errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Sequence

from . import __version__, perf, presets, resilience, storage
from .errors import CampaignForgeError, ValidationError
from .render import FORMATS, render
from .reporting import aggregate_reports, build_report, compare_policies
from .scenario import ScenarioSpec, check, load_scenario, to_toml, with_field
from .sim import EventTrace, run_campaign, sweep
from .units import parse_count, parse_duration, parse_size

DEFAULT_GPU_COUNTS = "32,64,128,256,512,1024,2048,4096"


def _csv_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(parse_count(x)) for x in _csv_list(text)]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("scenario")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--scenario", metavar="FILE", help="scenario TOML file")
    src.add_argument("--preset", choices=sorted(presets.PRESETS), help="built-in scenario (default: reference)")
    g.add_argument("--set", dest="overrides", action="append", default=[], metavar="PATH=VALUE", help="override one scenario field, e.g. checkpoint.interval_iterations=500")
    g.add_argument("--seed", type=int, help="override the scenario seed")
    g.add_argument("--no-strict", action="store_true", help="ignore unknown keys in the scenario file")
    g.add_argument("--dump-scenario", metavar="FILE", help="write the effective merged scenario as TOML")
    o = common.add_argument_group("output")
    o.add_argument("--format", choices=FORMATS, help="output format (default: table on a terminal, json otherwise)")
    o.add_argument("--out", metavar="FILE", help="write output here instead of standard output")

    parser = argparse.ArgumentParser(prog="campaign-forge", description="Plan and simulate large-scale training campaigns.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("simulate", parents=[common], help="run one campaign and emit its event trace")

    p = sub.add_parser("sweep", parents=[common], help="run a parameter x seed grid")
    p.add_argument("--param", required=True, metavar="PATH", help="scenario field to vary")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--seeds", help="comma-separated seeds (default: the scenario seed)")
    p.add_argument("--workers", type=int, default=1, help="parallel processes")

    p = sub.add_parser("plan-checkpoint", parents=[common], help="Young-Daly checkpoint interval")
    p.add_argument("--write-cost", type=parse_duration, help="effective checkpoint cost, e.g. 60s")
    p.add_argument("--mtbf", type=parse_duration, help="MTBF of the allocation, e.g. 2h")
    p.add_argument("--iter-time", type=parse_duration, help="iteration time, e.g. 3.72s")
    p.add_argument("--restore-cost", type=parse_duration, help="restore cost added to the waste model")

    p = sub.add_parser("plan-load", parents=[common], help="compare model loading strategies")
    p.add_argument("--payload", type=parse_size, help="payload size, e.g. 150GB (default: scenario checkpoint size)")
    p.add_argument("--nodes", type=int, help="number of nodes (default: scenario allocation)")
    p.add_argument("--tier", help="storage tier name (default: scenario checkpoint tier)")
    p.add_argument("--net", type=parse_size, help="per-node network bandwidth, e.g. 25GB")
    p.add_argument("--stripes", type=int, help="stripe count of the payload file")

    p = sub.add_parser("plan-tokenize", parents=[common], help="node-hours to tokenize a dataset")
    p.add_argument("--rate", type=parse_count, required=True, help="tokens per second per node")
    p.add_argument("--tokens", type=parse_count, help="tokens to produce (default: scenario dataset)")
    p.add_argument("--nodes", type=int, default=1, help="nodes used in parallel")
    p.add_argument("--allow-any-rate", action="store_true", help="accept rates outside the calibrated window")

    p = sub.add_parser("scaling", parents=[common], help="strong or weak scaling table")
    p.add_argument("--mode", choices=("strong", "weak"), default="strong")
    p.add_argument("--gpus", default=DEFAULT_GPU_COUNTS, help="ascending comma-separated GPU counts")

    p = sub.add_parser("score", parents=[common], help="saturation score of a telemetry CSV")
    p.add_argument("--telemetry", required=True, metavar="FILE", help="CSV with flops_rate,mem_bw,net_bw columns")
    p.add_argument("--mem-peak", type=parse_size, required=True, help="memory bandwidth ceiling, e.g. 3.35TB")
    p.add_argument("--net-peak", type=parse_size, required=True, help="network bandwidth ceiling, e.g. 25GB")

    p = sub.add_parser("report", parents=[common], help="campaign report or policy comparison")
    p.add_argument("--trace", metavar="FILE", help="report on an existing NDJSON trace")
    p.add_argument("--seeds", help="comma-separated seeds to simulate and average")
    p.add_argument(
        "--policy",
        action="append",
        default=[],
        metavar="LABEL:PATH=VALUE[;PATH=VALUE]",
        help="policy variant to compare; repeat for each variant",
    )
    return parser


# ---------------------------------------------------------------------------


def _load(args) -> ScenarioSpec:
    if args.scenario:
        s = load_scenario(args.scenario, strict=not args.no_strict)
    else:
        s = presets.preset(args.preset or "reference")
    for item in args.overrides:
        path, sep, value = item.partition("=")
        if not sep:
            raise ValidationError([(item, "expected PATH=VALUE")])
        s = with_field(s, path.strip(), value.strip(), validate_result=False)
    if args.seed is not None:
        s = with_field(s, "seed", args.seed, validate_result=False)
    s = check(s)
    if args.dump_scenario:
        Path(args.dump_scenario).write_text(to_toml(s))
    return s


def _seed_note(seeds) -> None:
    print(f"seed: {','.join(str(x) for x in seeds)}", file=sys.stderr)


def _simulate(args, fmt):
    s = _load(args)
    _seed_note([s.seed])
    return run_campaign(s)


def _sweep(args, fmt):
    s = _load(args)
    seeds = _ints(args.seeds) if args.seeds else [s.seed]
    _seed_note(seeds)
    return sweep(s, args.param, _csv_list(args.values), seeds, workers=args.workers)


def _plan_checkpoint(args, fmt):
    write_cost, mtbf, it, restore = args.write_cost, args.mtbf, args.iter_time, args.restore_cost
    if write_cost is None or mtbf is None:
        s = _load(args)
        model = perf.iteration_time(s)
        fa = resilience.failure_analytics(s, model.t_iteration)
        write_cost = s.checkpoint.write_cost if write_cost is None else write_cost
        mtbf = fa.cluster_mtbf if mtbf is None else mtbf
        it = model.t_iteration if it is None else it
        restore = s.checkpoint.restore_cost if restore is None else restore
    plan = resilience.plan_checkpoint(write_cost, mtbf, it, restore or 0.0)
    if fmt == "json":
        return {"summary": plan.summary(), "sensitivity": plan.records()}
    if fmt == "table":
        iters = "" if plan.interval_iterations is None else f" ~ {plan.interval_iterations} iterations"
        head = f"interval {plan.interval_seconds:.1f} s{iters}, waste {100 * plan.waste_at_optimum:.1f}% at optimum\n"
        for w in plan.warnings:
            head += f"warning: {w}\n"
        return head + "\n" + render("table", plan)
    return plan


def _plan_load(args, fmt):
    s = _load(args)
    tier = s.tier(args.tier or s.checkpoint.tier)
    cmp = storage.compare_load_strategies(
        args.payload or s.workload.checkpoint_bytes,
        args.nodes or s.scheduler.alloc_nodes,
        tier,
        args.net or s.cluster.net_bw_per_node,
        args.stripes,
    )
    if fmt == "table":
        other = next(p for p in cmp.alternatives if p.strategy != cmp.chosen.strategy)
        head = f"recommend {cmp.chosen.strategy}: {cmp.chosen.total_time:.1f} s vs {other.total_time:.1f} s\n\n"
        return head + render("table", cmp)
    return cmp


def _plan_tokenize(args, fmt):
    tokens = args.tokens
    if tokens is None:
        tokens = _load(args).dataset.total_tokens
    return storage.plan_tokenization(tokens, args.rate, args.nodes, allow_any_rate=args.allow_any_rate)


def _scaling(args, fmt):
    return perf.scaling_table(_load(args), _ints(args.gpus), args.mode)


def _score(args, fmt):
    s = _load(args)
    with open(args.telemetry, newline="") as fh:
        samples = [
            perf.TelemetrySample(
                float(r["flops_rate"]), float(r["mem_bw"]), float(r["net_bw"]), float(r.get("timestamp") or 0.0)
            )
            for r in csv.DictReader(fh)
        ]
    return perf.saturation_score(samples, s.cluster, (args.mem_peak, args.net_peak))


def _run_seeds(s: ScenarioSpec, seeds: Sequence[int]):
    reports = []
    for sd in seeds:
        run = with_field(s, "seed", sd)
        reports.append(build_report(run_campaign(run), run))
    return aggregate_reports(reports)


def _report(args, fmt):
    s = _load(args)
    if args.trace:
        trace = EventTrace.from_ndjson(Path(args.trace).read_text())
        return build_report(trace, with_field(s, "seed", trace.seed))
    seeds = _ints(args.seeds) if args.seeds else [s.seed]
    _seed_note(seeds)
    if not args.policy:
        return _run_seeds(s, seeds)
    variants = []
    for spec in args.policy:
        label, _, assigns = spec.partition(":")
        v = s
        for a in filter(None, (x.strip() for x in assigns.split(";"))):
            path, sep, value = a.partition("=")
            if not sep:
                raise ValidationError([(a, "expected PATH=VALUE")])
            v = with_field(v, path.strip(), value.strip(), validate_result=False)
        variants.append((label, check(v)))
    return compare_policies([(label, _run_seeds(v, seeds)) for label, v in variants])


HANDLERS = {
    "simulate": _simulate,
    "sweep": _sweep,
    "plan-checkpoint": _plan_checkpoint,
    "plan-load": _plan_load,
    "plan-tokenize": _plan_tokenize,
    "scaling": _scaling,
    "score": _score,
    "report": _report,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    fmt = args.format or ("table" if args.out is None and sys.stdout.isatty() else "json")
    try:
        result = HANDLERS[args.command](args, fmt)
        text = result if isinstance(result, str) else render(fmt, result)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
    except (CampaignForgeError, OSError, ValueError) as exc:
        if fmt == "json":
            err = {"error": type(exc).__name__, "message": str(exc)}
            if isinstance(exc, ValidationError):
                err["fields"] = exc.fields
            print(json.dumps(err, sort_keys=True), file=sys.stderr)
        else:
            print(f"campaign-forge: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
