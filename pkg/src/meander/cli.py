"""Command-line front end: evaluate laws, sample paths, run the acceptance gates.

Exit codes: 0 success, 1 gate failure (or exhausted rejection budget), 2 usage error.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from . import acceptance as acc
from . import excursion_laws as ex
from . import extremes_fpt as fx
from . import gauss_kernels as gk
from . import meander_laws as ml
from . import path_sampler as ps
from . import representation as rp
from . import verify_stats as vs
from .errors import ConvergenceError, DomainError, RejectionBudgetError

EXIT_OK, EXIT_GATE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_grid(text):
    """'lo:hi:n' with inclusive endpoints."""
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like lo:hi:n, got {text!r}")
    if n < 1 or not (math.isfinite(lo) and math.isfinite(hi)) or (n > 1 and not hi > lo):
        raise argparse.ArgumentTypeError(f"grid needs finite lo < hi and n >= 1, got {text!r}")
    return np.linspace(lo, hi, n)


def probability(text):
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0 < p < 0.5:
        raise argparse.ArgumentTypeError(f"significance level must lie in (0, 0.5), got {p}")
    return p


def fmt(x):
    return format(float(x), ".17g")


def write_csv(path, header, columns):
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(fmt(x) for x in row))
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def write_manifest(args, argv, outputs):
    if not outputs:
        return None
    params = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in vars(args).items()
              if k not in ("func",)}
    manifest = {"subcommand": args.command, "parameters": params, "seed": getattr(args, "seed", None),
                "output_paths": [os.path.abspath(p) for p in outputs], "tool_version": __version__,
                "argv": list(argv)}
    path = outputs[0] + ".manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path


def _meander_spec(args, at_barrier=False):
    start = None if at_barrier or args.u is None else args.u
    return ml.MeanderSpec(args.mu, args.v, start, args.t)


# ---------------------------------------------------------------------------
# subcommands


def cmd_density(args):
    y = args.y_grid
    t, v, mu = args.t, args.v, args.mu
    if args.law == "meander":
        if args.u is None:
            raise UsageError("--law meander needs --u above --v")
        vals = ml.marginal_density(ml.MeanderSpec(mu, v, args.u, t), _time(args, t), y)
    elif args.law == "meander-barrier":
        vals = ml.marginal_density_at_barrier(ml.MeanderSpec(mu, v, None, t), _time(args, t), y)
    elif args.law == "endpoint":
        vals = ml.endpoint_density(_meander_spec(args), y)
    elif args.law == "excursion":
        if args.u is None or args.c is None:
            raise UsageError("--law excursion needs --u and --c")
        vals = ex.excursion_marginal_density(ex.ExcursionSpec(mu, v, args.u, args.c, t), _time(args, t), y)
    else:
        mode = "start-limit" if args.c is not None else "both-limits"
        vals = ex.excursion_limit_marginal_density(t, _time(args, t), y - v, mode, args.c)
    write_csv(args.out, ["y", "density"], [y, np.atleast_1d(vals)])
    return EXIT_OK, [args.out] if args.out else []


def _time(args, t):
    if args.s is None:
        raise UsageError("this law needs --s")
    return args.s


def cmd_max(args):
    spec = _meander_spec(args, args.u is None)
    s = args.s if args.s is not None else args.t
    if args.x_grid is None:
        raise UsageError("max needs --x-grid")
    vals = [fx.max_cdf_any(fx.MaxQuery(spec, x, s)) for x in args.x_grid]
    write_csv(args.out, ["x", "cdf"], [args.x_grid, vals])
    return EXIT_OK, [args.out] if args.out else []


def cmd_fpt(args):
    spec = _meander_spec(args, args.u is None)
    if args.s_grid is None:
        raise UsageError("fpt needs --s-grid")
    surv, dens = [], []
    for s in args.s_grid:
        q = fx.FptQuery(spec, args.x, args.t_prime, s)
        surv.append(1.0 - fx.fpt_cdf(q))
        dens.append(fx.fpt_density_post_horizon(q) if s > args.t else float("nan"))
    write_csv(args.out, ["s", "survival", "density"], [args.s_grid, surv, dens])
    return EXIT_OK, [args.out] if args.out else []


def cmd_sample(args):
    cfg = ps.SimConfig(n_steps=args.n_steps, horizon=args.t, seed=args.seed, stream_id=args.stream,
                       max_rejections=args.max_rejections)
    col = cfg.n_steps if args.s is None else ps.column_for_time(cfg, args.s)
    outputs = []
    if args.kind == "fpt":
        if args.x is None or args.t_prime is None:
            raise UsageError("--kind fpt needs --x and --t-prime")
        times, meta = ps.sample_two_phase_fpt(_meander_spec(args, args.u is None), args.x, args.t_prime, cfg, args.n,
                                              epsilon=args.epsilon)
        if args.out:
            with open(args.out, "w") as fh:
                for tau in times:
                    fh.write(json.dumps({"first_passage": None if math.isinf(tau) else float(tau)}) + "\n")
            outputs.append(args.out)
        print(f"acceptance_rate={fmt(meta['accepted'] / meta['proposals'])}")
        return EXIT_OK, outputs
    record = None if args.out else [col]
    if args.kind == "free":
        batch = ps.sample_free_paths(args.mu, args.u if args.u is not None else 0.0, cfg, args.n)
    elif args.kind == "meander":
        if args.u is None:
            raise UsageError("--kind meander needs --u")
        batch = ps.sample_meander_paths(ml.MeanderSpec(args.mu, args.v, args.u, args.t), cfg, args.n, record)
    elif args.kind == "meander-barrier":
        batch = ps.sample_meander_paths_at_barrier(ml.MeanderSpec(args.mu, args.v, None, args.t), cfg, args.n,
                                                   args.epsilon, record)
    else:
        if args.u is None or args.c is None:
            raise UsageError("--kind excursion needs --u and --c")
        batch = ps.sample_excursion_paths(ex.ExcursionSpec(args.mu, args.v, args.u, args.c, args.t), cfg, args.n, record)
    if args.out:
        ps.write_jsonl(batch, args.out)
        outputs.append(args.out)
    j = int(np.searchsorted(batch.times, cfg.times()[col]))
    if args.hist:
        if args.y_grid is None:
            raise UsageError("--hist needs --y-grid (bin edges)")
        counts, edges = np.histogram(batch.values[:, j], args.y_grid)
        dens = counts / (len(batch) * np.diff(edges))
        write_csv(args.hist, ["y", "density"], [0.5 * (edges[1:] + edges[:-1]), dens])
        outputs.append(args.hist)
    line = f"acceptance_rate={fmt(batch.acceptance_rate)}"
    if args.kind in ("meander", "meander-barrier"):
        u = args.u if args.kind == "meander" else args.v + batch.metadata["epsilon"]
        line += f" survival_probability={fmt(gk.survival_probability(args.t, u, args.v, args.mu))}"
    print(line)
    return EXIT_OK, outputs


def cmd_represent(args):
    law = rp.LastZeroLaw(args.t, args.mu)
    cfg = ps.SimConfig(n_steps=args.n_steps, horizon=args.t, seed=args.seed, stream_id=args.stream)
    t0, vals = ps.sample_post_zero(args.mu, args.t, [args.s], cfg, args.n)
    y = args.y_grid
    half = rp.rescaled_post_zero_density(law, args.s, y, t0, "half")
    exact = rp.rescaled_post_zero_density(law, args.s, y, t0, "exact")
    rng = ps.stream_rng(args.seed, args.stream + 1, 0)
    mix = rp.sample_rescaled_mixture(law, args.s, args.n, rng, "half")
    rep = vs.ks_two_sample(np.sort(vals[:, 0]), np.sort(mix), "post-zero vs symmetric mixture")
    write_csv(args.out, ["y", "symmetric_mixture", "exact_mixture"], [y, half, exact])
    print(f"ks2_statistic={fmt(rep.statistic)} critical_value={fmt(rep.critical_value)} passed={rep.passed}")
    return EXIT_OK, [args.out] if args.out else []


def _criteria_list(text):
    if text in acc.GROUPS:
        return list(acc.GROUPS[text])
    try:
        nums = [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--only takes a group ({', '.join(acc.GROUPS)}) or numbers like 1,2")
    if any(n not in acc.CRITERIA for n in nums):
        raise argparse.ArgumentTypeError("criteria are numbered 1 to 10")
    return nums


def cmd_verify(args):
    results = acc.run_criteria(args.only, seed=args.seed, n_paths=args.n_paths, alpha=args.alpha, echo=print)
    outputs = []
    if args.out:
        with open(args.out, "w") as fh:
            json.dump([r.to_dict() for r in results], fh, indent=2, default=float)
        outputs.append(args.out)
    if args.csv:
        rows = [(r.number, c.label, c.value, c.threshold, int(c.passed)) for r in results for c in r.checks]
        with open(args.csv, "w") as fh:
            fh.write("criterion,check,value,threshold,passed\n")
            for n, label, value, thr, ok in rows:
                fh.write(f"{n},\"{label}\",{fmt(value)},{fmt(thr)},{ok}\n")
        outputs.append(args.csv)
    return (EXIT_OK if all(r.passed for r in results) else EXIT_GATE), outputs


def cmd_replay(args):
    try:
        with open(args.manifest) as fh:
            manifest = json.load(fh)
        argv = manifest["argv"]
    except (OSError, ValueError, KeyError) as err:
        raise UsageError(f"cannot read manifest: {err}")
    res = main(argv, _return_outputs=True)
    if isinstance(res, int):
        return res, []
    return res


# ---------------------------------------------------------------------------
# parser


def _common(p):
    p.add_argument("--mu", type=float, default=0.0, help="drift")
    p.add_argument("--v", type=float, default=0.0, help="barrier")
    p.add_argument("--u", type=float, default=None, help="start (omit for a barrier start)")
    p.add_argument("--t", type=float, default=1.0, help="horizon")
    p.add_argument("--out", default=None, help="output file (CSV to stdout when omitted)")


def build_parser():
    parser = argparse.ArgumentParser(prog="meander", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("density", help="marginal or endpoint density on a y grid")
    _common(p)
    p.add_argument("--law", required=True, choices=["meander", "meander-barrier", "endpoint", "excursion",
                                                     "excursion-limit"])
    p.add_argument("--c", type=float, default=None, help="excursion endpoint")
    p.add_argument("--s", type=float, default=None, help="observation time")
    p.add_argument("--y-grid", type=parse_grid, required=True)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("max", help="CDF of the running maximum on an x grid")
    _common(p)
    p.add_argument("--s", type=float, default=None, help="maximum over [0, s]; defaults to the horizon")
    p.add_argument("--x-grid", type=parse_grid, default=None)
    p.set_defaults(func=cmd_max)

    p = sub.add_parser("fpt", help="first-passage survival (and post-horizon density) on an s grid")
    _common(p)
    p.add_argument("--x", type=float, required=True, help="passage level")
    p.add_argument("--t-prime", type=float, required=True, help="end of the free phase")
    p.add_argument("--s-grid", type=parse_grid, default=None)
    p.set_defaults(func=cmd_fpt)

    p = sub.add_parser("sample", help="simulate conditioned paths")
    _common(p)
    p.add_argument("--kind", required=True, choices=["free", "meander", "meander-barrier", "excursion", "fpt"])
    p.add_argument("--c", type=float, default=None, help="excursion endpoint")
    p.add_argument("--x", type=float, default=None, help="passage level for --kind fpt")
    p.add_argument("--t-prime", type=float, default=None)
    p.add_argument("--n", type=int, default=1000, help="number of paths")
    p.add_argument("--n-steps", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=None, help="start offset for a barrier start")
    p.add_argument("--max-rejections", type=int, default=10_000_000)
    p.add_argument("--s", type=float, default=None, help="grid time for the histogram (default horizon)")
    p.add_argument("--hist", default=None, help="histogram CSV path")
    p.add_argument("--y-grid", type=parse_grid, default=None, help="histogram bin edges")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("represent", help="post-last-zero path against the +/- drift meander mixture")
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--s", type=float, required=True, help="fraction of the post-zero interval in (0, 1)")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--n-steps", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--y-grid", type=parse_grid, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_represent)

    p = sub.add_parser("verify", help="run the acceptance gates")
    p.add_argument("--only", type=_criteria_list, default=list(acc.CRITERIA),
                   help="group name or comma-separated criterion numbers")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-paths", type=int, default=acc.MC_PATHS)
    p.add_argument("--alpha", type=probability, default=vs.ALPHA, help="significance level of the KS gates")
    p.add_argument("--out", default=None, help="JSON report")
    p.add_argument("--csv", default=None, help="CSV summary")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None, _return_outputs=False):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    try:
        code, outputs = args.func(args)
        if args.command != "replay":
            write_manifest(args, argv, outputs)
    except (DomainError, UsageError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (RejectionBudgetError, ConvergenceError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_GATE
    if _return_outputs:
        return code, outputs
    return code


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
