"""Command line front end.

Every subcommand writes CSV (header row first, then data rows, then a
``# seed=... version=... model_hash=...`` line) to stdout or ``--out``.

Exit codes: 0 success, 1 validation failure, 2 resource guard, 3 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .bethe import BetheConfig, Population, estimate_b_sup, population_dynamics, project_to_mean
from .errors import InvalidArgument, ResourceLimitError
from .exact import audit, gibbs_measure
from .graphs import sample_m, sample_null
from .mc import VARIANTS, concentration_check, ordering_check, quenched_free_entropy
from .model import ModelSpec, check_bal, load_model, model_hash, model_to_dict, xi_sup
from .pinning import pinning_lemma_table
from .rng import RngStream
from .thresholds import NOT_DETECTED, ThresholdConfig, locate_d_cond
from .zoo import ZOO_NAMES, check_validity, witness_from_dict, zoo_model, zoo_witness

EXIT_OK, EXIT_VALIDATION, EXIT_GUARD, EXIT_USAGE = 0, 1, 2, 3
AUDIT_TOL = 1e-9


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")


def _seed(text: str) -> int:
    v = int(text)
    if not (0 <= v < 2 ** 64):
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


# ---------------------------------------------------------------- model source

def _zoo_params(args) -> dict:
    params = {}
    for key in ("k", "eps", "beta", "eta", "q"):
        v = getattr(args, key, None)
        if v is not None:
            params[key] = v
    if args.c is not None:
        params["c_values"] = args.c
    if args.c_probs is not None:
        params["c_probs"] = args.c_probs
    return params


def _load(args) -> tuple[ModelSpec, str | None]:
    path = getattr(args, "spec", None) or args.model
    if path and args.zoo:
        raise UsageError("give either a model file or --zoo, not both")
    if path:
        try:
            return load_model(path), None
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc}")
    if args.zoo:
        return zoo_model(args.zoo, **_zoo_params(args)), args.zoo
    raise UsageError("a model is required (file path, --model or --zoo)")


# ---------------------------------------------------------------- output

class _Table:
    def __init__(self, header: Sequence[str]):
        self.buf = io.StringIO()
        self.writer = csv.writer(self.buf, lineterminator="\n")
        self.writer.writerow(header)
        self.comments: list[str] = []

    def row(self, *values):
        self.writer.writerow([_fmt(v) for v in values])

    def comment(self, text: str):
        self.comments.append(text)

    def render(self, seed: int, model: ModelSpec | None) -> str:
        out = self.buf.getvalue()
        for c in self.comments:
            out += f"# {c}\n"
        mh = model_hash(model) if model is not None else "none"
        return out + f"# seed={seed} version={__version__} model_hash={mh}\n"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- subcommands

def _cmd_model_check(args) -> int:
    model, zoo_name = _load(args)
    t = _Table(["check", "status", "detail"])
    t.row("invariants", "pass", f"q={model.q} k={model.k} atoms={model.n_atoms}")
    bal = check_bal(model)
    t.row("BAL", "pass" if bal else "fail", repr(xi_sup(model).value))
    ok = bal
    witness = None
    if args.witness:
        try:
            with open(args.witness) as fh:
                witness = witness_from_dict(json.load(fh))
        except OSError as exc:
            raise UsageError(f"cannot read {args.witness}: {exc}")
        except json.JSONDecodeError as exc:
            raise InvalidArgument(f"invalid witness JSON: {exc}")
    elif zoo_name:
        witness = zoo_witness(zoo_name, **_zoo_params(args))
    if witness is not None:
        valid = check_validity(model, witness)
        t.row("validity", "pass" if valid else "fail", witness.kind)
        ok &= valid
    sys.stderr.write(f"BAL: {'pass' if bal else 'fail'}\n")
    _emit(args, t.render(args.seed, model))
    return EXIT_OK if ok else EXIT_VALIDATION


def _cmd_model_dump(args) -> int:
    model, _ = _load(args)
    text = json.dumps(model_to_dict(model), indent=2, sort_keys=True) + "\n"
    _emit(args, text)
    return EXIT_OK


def _cmd_xi_sup(args) -> int:
    model, _ = _load(args)
    res = xi_sup(model)
    t = _Table(["xi_sup"] + [f"maximizer_{i}" for i in range(model.q)])
    t.row(res.value, *res.maximizer.probs)
    _emit(args, t.render(args.seed, model))
    return EXIT_OK


def _bethe_config(args, seed: int | None = None) -> BetheConfig:
    return BetheConfig(N=args.N, sweeps=args.sweeps, damping=args.damping,
                       seed=args.seed if seed is None else seed, trace_samples=args.trace_samples,
                       eval_samples=args.eval_samples, workers=args.workers)


def _cmd_bethe(args) -> int:
    model, _ = _load(args)
    cfg = _bethe_config(args)
    t = _Table(["run" if args.restarts > 0 else "sweep", "b_hat", "std_error"])
    if args.restarts > 0:
        est = estimate_b_sup(model, args.d, args.restarts, cfg)
        for label, value, se in est.candidates:
            t.row(label, value, se)
        t.row("b_sup", est.value, est.std_error)
    else:
        init = None
        if args.init:
            with open(args.init) as fh:
                init = Population.from_dict(json.load(fh))
        pop, trace = population_dynamics(model, args.d, cfg, init)
        for i, est in enumerate(trace):
            t.row(i, est.value, est.std_error)
        if args.dump_population:
            with open(args.dump_population, "w") as fh:
                json.dump(pop.to_dict(), fh)
        _, rep = project_to_mean(pop, model.gamma_star.probs, model.psi_min)
        t.comment(f"projection_alpha={rep.alpha!r}")
    _emit(args, t.render(args.seed, model))
    return EXIT_OK


def _cmd_threshold(args) -> int:
    model, _ = _load(args)
    d_max = model.d_max if args.d_max is None else args.d_max
    if not (0 < d_max <= model.d_max):
        raise InvalidArgument(f"--d-max must lie in (0, {model.d_max}]")
    cfg = ThresholdConfig(bethe=_bethe_config(args), restarts=max(args.restarts, 1), tol=args.tol)
    grid = np.linspace(0.0, d_max, args.grid)
    rep = locate_d_cond(model, cfg, grid, workers=1)
    t = _Table(["d", "phi_a", "b_sup", "b_sup_se", "delta_star", "mi_limit"])
    for p in rep.points:
        t.row(p.d, p.phi_a, p.b_sup, p.b_sup_se, p.delta_star, p.mi_limit)
    br = rep.d_cond_bracket
    t.comment("d_cond=" + (NOT_DETECTED if br == NOT_DETECTED else f"[{br[0]!r},{br[1]!r}]"))
    _emit(args, t.render(args.seed, model))
    return EXIT_OK


def _cmd_mc(args) -> int:
    model, _ = _load(args)
    stream = RngStream(args.seed, 0x3C)
    if args.check == "ordering":
        rep = ordering_check(model, args.n, args.d, args.samples, stream, args.workers)
        t = _Table(["m", "count", "planted", "planted_se", "annealed", "null", "null_se", "ok"])
        for r in rep.rows:
            t.row(r.m, r.count, r.planted, r.planted_se, r.annealed, r.null, r.null_se, r.ok)
        t.comment(f"planted_gap={rep.planted_gap!r} se={rep.planted_gap_se!r} null_gap={rep.null_gap!r} "
                  f"se={rep.null_gap_se!r} passed={_fmt(rep.passed)}")
        _emit(args, t.render(args.seed, model))
        return EXIT_OK if rep.passed else EXIT_VALIDATION
    if args.check == "concentration":
        variant = "null" if args.variant == "all" else args.variant
        rep = concentration_check(model, args.n, args.d, args.samples, stream, variant, workers=args.workers)
        t = _Table(["r", "tail", "count"])
        for r, p, c in zip(rep.r_grid, rep.tail, rep.tail_counts):
            t.row(r, p, c)
        t.comment(f"slope={rep.slope!r} r_squared={rep.r_squared!r} fit_points={rep.fit_points}")
        _emit(args, t.render(args.seed, model))
        return EXIT_OK
    variants = VARIANTS if args.variant == "all" else (args.variant,)
    t = _Table(["n", "d", "variant", "estimate", "std_error", "samples"])
    for i, v in enumerate(variants):
        est, se = quenched_free_entropy(model, args.n, args.d, v, args.samples, stream.spawn(i), args.workers)
        t.row(args.n, args.d, v, est, se, args.samples)
    _emit(args, t.render(args.seed, model))
    return EXIT_OK


def _cmd_exact_audit(args) -> int:
    model, _ = _load(args)
    t = _Table(["check", "residual", "pass"])
    ok = True
    for name, res in audit(model, args.n, args.m):
        passed = res <= AUDIT_TOL
        ok &= passed
        t.row(name, res, passed)
    _emit(args, t.render(args.seed, model))
    return EXIT_OK if ok else EXIT_VALIDATION


def _cmd_pinning_audit(args) -> int:
    model, zoo_name = _load(args)
    label = zoo_name or "file"
    root = RngStream(args.seed, 0x919)
    t = _Table(["model", "graph", "n", "m", "ell", "theta", "lhs", "se", "rhs", "pass"])
    thetas = args.theta or sorted({t for t in (2.0, 4.0, float(args.n)) if t <= args.n})
    ok = True
    for gi in range(args.graphs):
        g = root.spawn(gi).gen
        m = sample_m(model, args.d, args.n, g)
        graph = sample_null(model, args.n, m, g)
        mu = gibbs_measure(model, graph)
        for chk in pinning_lemma_table(mu, args.ell, thetas, args.convention):
            ok &= chk.passed
            t.row(label, gi, args.n, m, chk.ell, chk.theta_cap, chk.lhs, chk.std_error, chk.rhs, chk.passed)
    _emit(args, t.render(args.seed, model))
    return EXIT_OK if ok else EXIT_VALIDATION


# ---------------------------------------------------------------- parser

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=_seed, default=0, help="unsigned 64-bit seed (default 0)")
    p.add_argument("--workers", type=int, default=1, help="worker threads; results do not depend on it")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.add_argument("--model", help="model JSON file")
    p.add_argument("--zoo", choices=ZOO_NAMES, help="built-in model instead of a file")
    p.add_argument("--k", type=int, help="zoo arity")
    p.add_argument("--q", type=int, help="zoo colors (constant model)")
    p.add_argument("--eps", type=float, help="NAE-SAT softness")
    p.add_argument("--beta", type=float, help="k-spin inverse temperature")
    p.add_argument("--eta", type=float, help="channel flip probability")
    p.add_argument("--c", type=_floats, help="constant model weight values")
    p.add_argument("--c-probs", type=_floats, help="constant model weight probabilities")
    return p


def _bethe_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--N", type=int, default=10_000, help="population size")
    p.add_argument("--sweeps", type=int, default=200)
    p.add_argument("--damping", type=float, default=0.0)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--eval-samples", type=int, default=100_000)
    p.add_argument("--trace-samples", type=int, default=2_000)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="plantedfg", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    model = sub.add_parser("model", help="model validation and export")
    msub = model.add_subparsers(dest="action", parser_class=_Parser)
    chk = msub.add_parser("check", parents=[common], help="invariants, BAL and witness validity")
    chk.add_argument("spec", nargs="?")
    chk.add_argument("--witness", help="validity witness JSON")
    chk.set_defaults(func=_cmd_model_check)
    dump = msub.add_parser("dump", parents=[common], help="print the model as JSON")
    dump.add_argument("spec", nargs="?")
    dump.set_defaults(func=_cmd_model_dump)

    xs = sub.add_parser("xi-sup", parents=[common], help="maximum of Xi over the simplex")
    xs.add_argument("spec", nargs="?")
    xs.set_defaults(func=_cmd_xi_sup)

    b = sub.add_parser("bethe", parents=[common], help="population dynamics and B_sup estimate")
    b.add_argument("--d", type=float, required=True)
    _bethe_args(b)
    b.add_argument("--init", help="population JSON to start from (with --restarts 0)")
    b.add_argument("--dump-population", help="write the final population JSON (with --restarts 0)")
    b.set_defaults(func=_cmd_bethe)

    th = sub.add_parser("threshold", parents=[common], help="delta_star curve and d_cond bracket")
    th.add_argument("--d-max", type=float)
    th.add_argument("--grid", type=int, default=11, help="number of grid points on [0, d_max]")
    th.add_argument("--tol", type=float, default=0.05, help="bisection bracket width")
    _bethe_args(th)
    th.set_defaults(func=_cmd_threshold)

    mc = sub.add_parser("mc", parents=[common], help="quenched free entropy estimates")
    mc.add_argument("--n", type=int, required=True)
    mc.add_argument("--d", type=float, required=True)
    mc.add_argument("--variant", choices=VARIANTS + ("all",), default="all")
    mc.add_argument("--samples", type=int, default=1000)
    mc.add_argument("--check", choices=("estimate", "ordering", "concentration"), default="estimate")
    mc.set_defaults(func=_cmd_mc)

    ex = sub.add_parser("exact", help="exact enumeration checks")
    exs = ex.add_subparsers(dest="action", parser_class=_Parser)
    au = exs.add_parser("audit", parents=[common], help="identity residuals by enumeration")
    au.add_argument("--n", type=int, required=True)
    au.add_argument("--m", type=int, required=True)
    au.set_defaults(func=_cmd_exact_audit)

    pn = sub.add_parser("pinning", help="pinning bound checks")
    pns = pn.add_subparsers(dest="action", parser_class=_Parser)
    pa = pns.add_parser("audit", parents=[common], help="pinning bound on Gibbs measures of sampled graphs")
    pa.add_argument("--n", type=int, default=8)
    pa.add_argument("--d", type=float, default=1.0)
    pa.add_argument("--theta", type=_floats, help="pin caps (default 2,4,n)")
    pa.add_argument("--ell", type=_ints, default=[2, 3])
    pa.add_argument("--graphs", type=int, default=5)
    pa.add_argument("--convention", choices=("collapse", "literal"), default="collapse")
    pa.set_defaults(func=_cmd_pinning_audit)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if getattr(args, "workers", 1) < 1:
        sys.stderr.write("plantedfg: error: --workers must be >= 1\n")
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"plantedfg: error: {exc}\n")
        return EXIT_USAGE
    except ResourceLimitError as exc:
        sys.stderr.write(f"plantedfg: resource guard: {exc}\n")
        return EXIT_GUARD
    except InvalidArgument as exc:
        sys.stderr.write(f"plantedfg: invalid: {exc}\n")
        return EXIT_VALIDATION


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
