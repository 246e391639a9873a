"""Command-line front end: analyze, reproduce, simulate."""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from .datasets import BUNDLED_IDS, bundle, evaluate_expectations, load_dataset
from .errors import HiGarroteError, InvalidCodingError, InvalidInputError, ParseError
from .garrote import HiGarroteOptions, higarrote
from .io import load_config, load_design
from .simulate import SimSpec, default_threads, run_simulation

_SCOPE_MAP = {"auto": "auto", "main-only": "main_only", "main-2fi": "main_plus_2fi"}

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _default_seed() -> int:
    env = os.environ.get("HIGARROTE_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise InvalidInputError(f"HIGARROTE_SEED={env!r} is not an integer")
    return 0


def _add_fit_flags(sub):
    sub.add_argument("--heredity", choices=["weak", "strong"], default="weak")
    sub.add_argument("--scope", choices=sorted(_SCOPE_MAP), default="auto")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--grid-points", type=int, default=50)
    sub.add_argument("--wide-interval", action="store_true",
                     help="use the budget interval [0.1, n-1] instead of [0.1, 0.3(n-1)]")
    sub.add_argument("--n-starts", type=int, default=None,
                     help="override the k+1 default number of optimizer starts")


def _options(args) -> HiGarroteOptions:
    return HiGarroteOptions(
        heredity=args.heredity,
        scope=_SCOPE_MAP[args.scope],
        seed=args.seed if args.seed is not None else _default_seed(),
        grid_points=args.grid_points,
        wide_interval=args.wide_interval,
        n_starts=args.n_starts,
    )


def _emit(text, out_path):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_analyze(args) -> int:
    config = load_config(args.config)
    design = load_design(args.design, config)
    report = higarrote(design, _options(args), dataset=config.get("dataset"))
    if args.output == "json":
        _emit(json.dumps(report.to_dict(), indent=2), args.out)
    else:
        _emit(report.to_text(), args.out)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    ids = list(BUNDLED_IDS) if args.dataset == "all" else [args.dataset]
    seed = args.seed if args.seed is not None else _default_seed()
    options = HiGarroteOptions(seed=seed)

    def run_one(dataset_id):
        bun = bundle(dataset_id)
        design, _ = load_dataset(dataset_id)
        report = higarrote(design, options, dataset=dataset_id)
        return dataset_id, report, evaluate_expectations(report, bun)

    workers = default_threads(len(ids))
    if workers > 1 and len(ids) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_one, ids))
    else:
        rows = [run_one(i) for i in ids]

    all_ok = True
    for dataset_id, report, results in rows:
        ds_ok = all(r.passed for r in results)
        all_ok = all_ok and ds_ok
        ms = report.timings.get("total_ms", 0.0)
        print(f"{'PASS' if ds_ok else 'FAIL'}  {dataset_id}  ({ms:.0f} ms)")
        for r in results:
            print(f"    [{'ok' if r.passed else 'FAIL'}] {r.description}: {r.detail}")
        if args.verbose:
            top = ", ".join(f"{lab}({b:.2f})" for lab, b in report.effects[:8])
            print(f"    effects: {top}   refit R^2 = {report.r_squared:.3f}")
    return EXIT_OK if all_ok else EXIT_FAILURE


def cmd_simulate(args) -> int:
    spec = SimSpec.from_dict(load_config(args.spec))
    if args.seed is not None:
        spec.seed = args.seed
    result = run_simulation(spec, threads=args.threads)
    print(
        f"simulation: {spec.design_id}, sd={spec.noise_sd}, "
        f"{spec.replications} replications, seed={spec.seed}"
    )
    print(result.summary_text())
    if args.out_csv:
        result.write_csv(args.out_csv)
        print(f"per-replication records written to {args.out_csv}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="higarrote",
        description="Automated effect selection for designed experiments "
                    "(heredity-constrained nonnegative garrote).",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p_an = subs.add_parser("analyze", help="fit one design CSV")
    p_an.add_argument("design", help="design CSV path")
    p_an.add_argument("--config", required=True, help="JSON or TOML sidecar config")
    _add_fit_flags(p_an)
    p_an.add_argument("--output", choices=["json", "text"], default="text")
    p_an.add_argument("--out", default=None, help="write the report here instead of stdout")
    p_an.set_defaults(func=cmd_analyze)

    p_re = subs.add_parser("reproduce", help="check bundled datasets against expectations")
    p_re.add_argument("dataset", nargs="?", default="all",
                      choices=list(BUNDLED_IDS) + ["all"])
    p_re.add_argument("--seed", type=int, default=None)
    p_re.add_argument("--verbose", action="store_true")
    p_re.set_defaults(func=cmd_reproduce)

    p_si = subs.add_parser("simulate", help="Monte Carlo study from a JSON spec")
    p_si.add_argument("--spec", required=True, help="simulation spec (JSON/TOML)")
    p_si.add_argument("--seed", type=int, default=None)
    p_si.add_argument("--threads", type=int, default=None)
    p_si.add_argument("--out-csv", default=None)
    p_si.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, InvalidInputError, InvalidCodingError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HiGarroteError as exc:
        stage = f" [stage: {exc.stage}]" if exc.stage else ""
        print(f"error: {exc}{stage}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
