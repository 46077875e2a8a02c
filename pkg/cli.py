# -*- coding: utf-8 -*-
"""
@Project : pandora_pnoi
@File    : cli.py
@Date    : 2026/10/18

Command-line entry point. Exit codes: 0 success, 1 verification failure,
2 usage, parse, validation or size error.
"""
import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional

import pandas as pd
from pydantic import ValidationError

from bench import METHODS, BenchmarkService
from core import InvalidInstanceError, PandoraError, ensure_valid, format_scalar, instance_to_json, max_kappa_expectation
from exact import best_structured_policy, classic_optimal_value, evaluate_structured_policy, optimal_value
from lclrs3 import partition_answer, reduce_partition, reduction_meta
from policies import SimulationConfig, half_approx, run_index_policy, summarize_traces
from ptas import ptas_pipeline
from settings import settings
from storage import ArtifactStore, InstanceStore
from verify import SUITES, VerifyService

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def show(value: Fraction, pretty: bool) -> str:
    text = format_scalar(value)
    if pretty:
        return f"{text} ({float(value):.10g})"
    return text


def load_instance(path: str):
    return ensure_valid(InstanceStore.read(path))


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    if args.mode == "classic":
        print(show(classic_optimal_value(inst), args.pretty))
        return EXIT_OK
    value, table = optimal_value(inst)
    print(show(value, args.pretty))
    if args.table:
        ArtifactStore.write_table(args.table, table)
        logger.info(f"value table written to {args.table}")
    return EXIT_OK


def cmd_classic(args) -> int:
    args.mode, args.table = "classic", None
    return cmd_solve(args)


def cmd_simulate(args) -> int:
    inst = load_instance(args.instance)
    cfg = SimulationConfig(seed=args.seed, trials=args.trials)
    traces = run_index_policy(inst, cfg)
    summary = summarize_traces(traces, policy="index", seed=args.seed)
    if args.traces:
        ArtifactStore.write_traces(args.traces, traces)
    if args.summary:
        ArtifactStore.write_csv(args.summary, pd.DataFrame([summary.model_dump(mode="json")],
                                                           columns=["policy", "trials", "seed", "mean", "stderr"]))
    print(f"exact {show(max_kappa_expectation(inst), args.pretty)}")
    print(f"mean {show(summary.mean, args.pretty)} stderr {summary.stderr:.6g}")
    return EXIT_OK


def cmd_eval(args) -> int:
    inst = load_instance(args.instance)
    policy = ArtifactStore.read_structured_policy(args.policy)
    print(show(evaluate_structured_policy(inst, policy), args.pretty))
    return EXIT_OK


def cmd_structured(args) -> int:
    inst = load_instance(args.instance)
    policy, value = best_structured_policy(inst)
    print(show(value, args.pretty))
    print(json.dumps(policy.to_json_dict()))
    if args.out:
        ArtifactStore.write_structured_policy(args.out, policy)
    return EXIT_OK


def cmd_reduce(args) -> int:
    try:
        source = [int(s) for s in args.partition.split(",") if s.strip()]
    except ValueError:
        logger.error(f"Error parsing partition {args.partition!r}")
        print(f"error: --partition expects comma-separated integers, got {args.partition!r}", file=sys.stderr)
        return EXIT_USAGE
    if args.answer and len(source) > settings.reduction_answer_limit:
        print(f"error: --answer is limited to {settings.reduction_answer_limit} values "
              f"(the exhaustive search covers {len(source) + 2}! orders)", file=sys.stderr)
        return EXIT_USAGE
    red = reduce_partition(source)
    if args.out:
        InstanceStore.write(args.out, red.instance.base)
        meta_path = Path(args.out).with_suffix(".meta.json")
        ArtifactStore.write_meta(meta_path, reduction_meta(red))
        logger.info(f"reduction written to {args.out} and {meta_path}")
    else:
        print(instance_to_json(red.instance.base))
    if args.answer:
        print(partition_answer(red).label)
    return EXIT_OK


def cmd_verify(args) -> int:
    report = VerifyService().run(args.suite, seed=args.seed, cases=args.cases)
    for prop, ok in report.properties.items():
        print(f"{'PASS' if ok else 'FAIL'} {prop}")
    if report.failures:
        first = report.failures[0]
        print(f"first failure: case {first.case}: {first.prop} {first.detail}".rstrip())
        if first.instance:
            print(first.instance)
        return EXIT_FAILED
    return EXIT_OK


def cmd_ptas(args) -> int:
    inst = load_instance(args.instance)
    result = ptas_pipeline(inst, args.epsilon)
    print(show(result.payoff, args.pretty))
    if args.out:
        ArtifactStore.write_ssdp_policy(args.out, result.policy)
    if args.report:
        opt_lower = half_approx(inst)
        try:
            opt_exact: Optional[Fraction] = optimal_value(inst)[0]
        except PandoraError:
            opt_exact = None
        reference = opt_exact if opt_exact is not None else opt_lower
        ratio = result.payoff / reference if reference else Fraction(1)
        row = {
            "theta": format_scalar(result.theta.value),
            "m": result.m,
            "opt_lower": format_scalar(opt_lower),
            "opt_exact": format_scalar(opt_exact) if opt_exact is not None else "",
            "opt_L": format_scalar(result.opt_l),
            "lifted_payoff": format_scalar(result.payoff),
            "ratio": format_scalar(ratio),
        }
        ArtifactStore.write_csv(args.report, pd.DataFrame([row]))
    return EXIT_OK


def cmd_bench(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    df = BenchmarkService().run(args.dir, methods, timing=args.timing)
    ArtifactStore.write_csv(args.out, df)
    if args.xlsx:
        ArtifactStore.write_xlsx(args.xlsx, df, sheet_name="bench")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pandora", description="Pandora's box with non-obligatory inspection")
    parser.add_argument("--verbose", action="store_true", help="enable debug logging")
    parser.add_argument("--pretty", action="store_true", help="append decimal approximations to printed values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="exact optimal value by dynamic programming")
    p.add_argument("--instance", required=True)
    p.add_argument("--mode", choices=["pnoi", "classic"], default="pnoi")
    p.add_argument("--table", help="write the value table JSON here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("classic", help="classic optimum (no taking unopened boxes)")
    p.add_argument("--instance", required=True)
    p.set_defaults(func=cmd_classic)

    p = sub.add_parser("index", help="simulate the index policy")
    p.add_argument("--instance", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--traces", help="write traces as JSON lines here")
    p.add_argument("--summary", help="write the mean/stderr CSV here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="evaluate a structured policy file")
    p.add_argument("--instance", required=True)
    p.add_argument("--policy", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("structured", help="exhaustive structured policy search")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", help="write the policy JSON here")
    p.set_defaults(func=cmd_structured)

    p = sub.add_parser("reduce", help="Partition to LCLRS3 reduction")
    p.add_argument("--partition", required=True, help='comma-separated integers, e.g. "1,1,2"')
    p.add_argument("--out", help="instance file; the meta sidecar goes next to it")
    p.add_argument("--answer", action="store_true", help="solve the reduction and print yes/no")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("verify", help="randomized property suites")
    p.add_argument("--suite", required=True, choices=SUITES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=100)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("ptas", help="discretization pipeline")
    p.add_argument("--instance", required=True)
    p.add_argument("--epsilon", default="1/10")
    p.add_argument("--out", help="write the policy JSON here")
    p.add_argument("--report", help="write the report CSV here")
    p.set_defaults(func=cmd_ptas)

    p = sub.add_parser("bench", help="evaluate methods over a directory of instances")
    p.add_argument("--dir", required=True)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--out", required=True)
    p.add_argument("--xlsx", help="also write a spreadsheet copy")
    p.add_argument("--timing", action="store_true", help="add wall-time column")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else getattr(logging, settings.log_level.upper(), logging.WARNING)
    logging.basicConfig(level=level, format="%(asctime)s - %(levelname)s - %(message)s")
    try:
        return args.func(args)
    except InvalidInstanceError as e:
        for violation in e.violations:
            print(f"invalid instance: {violation}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as e:
        print(f"error: malformed input: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (PandoraError, OSError, KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
