"""``walklab`` command line: simulate, beta, oracle, report, audit.

Exit status 0 on success, 1 on usage or validation errors, 2 on runtime failures.
"""
import argparse
import json
import os
import sys

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _threads(args):
    if args.threads is not None:
        n = args.threads
    else:
        env = os.environ.get("WALKLAB_THREADS")
        try:
            n = int(env) if env else 1
        except ValueError:
            raise ValueError(f"WALKLAB_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise ValueError("thread count must be >= 1")
    return n


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _emit(args, record, text):
    print(json.dumps(record, sort_keys=True) if args.json else text)


def cmd_simulate(args):
    from .experiment import ExperimentConfig, run_experiment

    if args.config is None:
        raise ValueError("simulate needs --config PATH")
    if not os.path.isfile(args.config):
        raise ValueError(f"config file not found: {args.config}")
    cfg = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    if args.threads is not None or os.environ.get("WALKLAB_THREADS"):
        cfg.threads = _threads(args)
    cfg.validate()
    summary = run_experiment(cfg)
    flags = summary["pass_flags"]
    text = [f"wrote raw.csv, aggregate.csv, summary.json, report.txt to {cfg.output_dir}",
            f"beta_d = {summary['beta_constant']['value']:.6f} "
            f"({summary['beta_constant']['source']})"]
    text += [f"{'PASS' if v else 'FAIL'} {k}" for k, v in flags.items()]
    _emit(args, {"output_dir": cfg.output_dir, "beta_constant": summary["beta_constant"],
                 "pass_flags": flags}, "\n".join(text))


def cmd_beta(args):
    from .hitting.bracket import exact_bracket, extrapolated_estimate
    from .hitting.estimate import CutoffPolicy, estimate_return_before_neighbor
    from .rng import RngStream
    from .statistics import BetaConstant, BetaSource

    d = args.d
    if d not in (2, 3, 4, 5):
        raise ValueError("--d must be one of 2, 3, 4, 5")
    threads = _threads(args)
    lines = []
    record = {}
    if args.trials:
        cutoff = CutoffPolicy.radius(args.cutoff_radius) if args.cutoff_radius else None
        est = estimate_return_before_neighbor(d, args.b, cutoff, args.trials,
                                              RngStream(args.seed or 0), threads)
        bc = BetaConstant.from_probability(est.probability, BetaSource.MONTE_CARLO)
        record["estimate"] = est.to_record()
        record["beta_constant"] = bc.to_dict()
        lines.append(f"p_hat = {est.probability:.6f} +- {est.half_width:.6f} "
                     f"({args.trials} trials, {est.undecided} capped)")
        if est.lower != est.upper:
            lines.append(f"  pessimistic {est.lower:.6f}, optimistic {est.upper:.6f}")
        lines.append(f"beta_hat = {bc.value:.6f}")
    if args.box_radius:
        br = exact_bracket(d, args.b, args.box_radius)
        record["bracket"] = br.to_record()
        lines.append(f"bracket L={br.box_radius}: [{br.lower:.6f}, {br.upper:.6f}] "
                     f"width {br.width:.6f}")
        if d == 2:
            p = br.midpoint
        else:
            p, _ = extrapolated_estimate(d, args.b, (max(2, args.box_radius // 2), args.box_radius))
            lines.append(f"extrapolated P(T0<Tb) = {p:.6f}")
        bc = BetaConstant.from_probability(p, BetaSource.EXACT_BRACKET)
        record["bracket_beta_constant"] = bc.to_dict()
        lines.append(f"beta from bracket = {bc.value:.6f}")
    if not record:
        raise ValueError("beta needs --trials and/or --box-radius")
    _emit(args, record, "\n".join(lines))


def cmd_oracle(args):
    from .oracle import EVENTS, enumerate, enumerate_hitting

    params = {}
    for key in ("p", "threshold", "beta", "delta", "k", "m", "b"):
        v = getattr(args, key)
        if v is not None:
            params[key] = v
    if args.stat in EVENTS:
        res = enumerate_hitting(args.d, args.stat, args.n, params, threads=_threads(args))
    else:
        res = enumerate(args.d, args.n, args.stat, params, threads=_threads(args),
                        audit=args.audit)
    e = res.expectation
    dist = ", ".join(f"{k}: {v}" for k, v in sorted(res.distribution.items()))
    _emit(args, res.to_dict(), f"{e.numerator}/{e.denominator}\n"
                               f"distribution over {res.total} paths: {{{dist}}}")


def cmd_report(args):
    from .experiment import convergence_report, load_summary
    from .plots import render_all

    src = args.out or "."
    summary = load_summary(src)
    text = convergence_report(summary)
    with open(os.path.join(src, "report.txt"), "w") as fh:
        fh.write(text)
    figs = render_all(summary, src)
    if args.json:
        print(json.dumps({"report": os.path.join(src, "report.txt"), "figures": figs,
                          "pass_flags": summary["pass_flags"]}, sort_keys=True))
    else:
        print(text, end="")
        print("figures: " + ", ".join(figs))


def cmd_audit(args):
    from .audit import audit_sweep, enumeration_audit

    rep = audit_sweep(args.d, args.paths, args.length, args.seed or 0)
    record = rep.to_dict()
    if args.enumerate:
        record["enumerated_paths"] = enumeration_audit(args.d, args.enumerate)
    _emit(args, record,
          f"{rep.paths} paths of length {args.length} in d={args.d}: "
          f"{len(rep.mismatches)} tracker mismatches, "
          f"{len(rep.nesting_failures)} nesting failures out of {rep.nesting_checked} checks"
          + (f"; {record['enumerated_paths']} enumerated paths agree" if args.enumerate else ""))
    if not rep.ok:
        raise RuntimeError("audit found discrepancies")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--seed", type=_u64, metavar="U64")
    common.add_argument("--threads", type=int, metavar="N")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--json", action="store_true", help="machine-readable output")

    parser = _Parser(prog="walklab", description="random walk inner-boundary laboratory")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", parents=[common], help="run an experiment from a config file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("beta", parents=[common], help="estimate P(T0<Tb) and beta_d")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--b", type=int, default=None, help="direction index of the neighbour")
    p.add_argument("--trials", type=int, default=0)
    p.add_argument("--cutoff-radius", type=int, default=None)
    p.add_argument("--box-radius", type=int, default=None)
    p.set_defaults(func=cmd_beta)

    p = sub.add_parser("oracle", parents=[common], help="exact enumeration over all paths")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--stat", required=True,
                   help="M, M0, L, range_size, J, Theta, or an event: "
                        "'T0<Tb^k', 'T0>m', 'Tb>m', 'T0^Tb>m'")
    p.add_argument("--p", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--b", type=int)
    p.add_argument("--audit", action="store_true")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("report", parents=[common], help="report and figures from --out DIR")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("audit", parents=[common], help="tracker vs recomputation sweep")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--length", type=int, default=1000)
    p.add_argument("--enumerate", type=int, default=0, metavar="N",
                   help="also audit every path of length N")
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_INVALID
    try:
        args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"walklab {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        print(f"walklab {args.command}: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
