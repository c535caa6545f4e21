"""Command-line front end.

Exit codes: 0 success / all verdicts pass, 1 a verdict failed, 2 parameter
error, 3 input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import secrets
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .errors import CapacityError, DataError, NormalizationError, ParameterError, ShapeError
from .montecarlo import fixed_test_vector
from .params import JLParams, compute_parameters, validate_params
from .sampler import SeedSpec, sample_matrix, save_matrix
from .transform import apply_batch, read_vectors, write_vectors

DEFAULT_SEED = 20190917

EXIT_OK, EXIT_VERDICT, EXIT_PARAM, EXIT_INPUT = 0, 1, 2, 3

_DEFAULT_TRIALS = {"tails": 10_000, "djl": 2_000, "moments": 100_000, "mgf": 10_000, "baseline": 10_000}


def _seed(value: str) -> int:
    if value == "entropy":
        return secrets.randbits(64)
    try:
        seed = int(value, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer or 'entropy', got {value!r}")
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return seed


def _float_list(value: str) -> list[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {value!r}")


def _add_shape_args(p):
    g = p.add_argument_group("parameters (give either --eps/--delta or --d/--s)")
    g.add_argument("--eps", type=float, help="target distortion in (0, 1)")
    g.add_argument("--delta", type=float, help="failure probability in (0, 1)")
    g.add_argument("--d", type=int, help="output dimension")
    g.add_argument("--s", type=int, help="nonzeros per column")


def _add_seed_arg(p):
    p.add_argument("--seed", type=_seed, default=DEFAULT_SEED,
                   help=f"master seed (default {DEFAULT_SEED}); 'entropy' for a fresh one")


def _resolve_params(args, require_eps=False) -> JLParams:
    derived = args.eps is not None or args.delta is not None
    explicit = args.d is not None or args.s is not None
    if derived and explicit:
        raise ParameterError("params", "give either --eps/--delta or --d/--s, not both")
    if derived:
        if args.eps is None or args.delta is None:
            raise ParameterError("params", "--eps and --delta must be given together")
        return compute_parameters(args.eps, args.delta)
    if require_eps:
        raise ParameterError("params", "this command needs --eps and --delta")
    if args.d is None or args.s is None:
        raise ParameterError("params", "--d and --s must be given together")
    params = JLParams.explicit(args.d, args.s)
    if params.d < 1 or not 1 <= params.s <= params.d:
        raise ParameterError("s", f"need 1 <= s <= d, got d={params.d}, s={params.s}")
    return params


def cmd_params(args) -> int:
    params = compute_parameters(args.eps, args.delta)
    violations = validate_params(params)
    if args.json:
        doc = {k: params.to_dict()[k] for k in
               ("epsilon", "delta", "d", "s", "p_nominal", "p_actual", "feasible")}
        doc["violations"] = violations
        doc["warnings"] = list(params.warnings)
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(f"epsilon   = {params.epsilon}")
        print(f"delta     = {params.delta}")
        print(f"d         = {params.d}")
        print(f"s         = {params.s}")
        print(f"p_nominal = {params.p_nominal:.6g}")
        print(f"p_actual  = {params.p_actual:.6g}")
        print(f"feasible  = {params.feasible} (s^2 = {params.s ** 2} vs d = {params.d})")
        for w in list(params.warnings) + violations:
            print(f"warning: {w}")
    return EXIT_OK


def cmd_embed(args) -> int:
    params = _resolve_params(args)
    batch = read_vectors(args.input, delimiter=args.delimiter, labeled=args.labeled)
    A = sample_matrix(params.d, batch.m, params.s, SeedSpec(args.seed))
    Y = apply_batch(A, batch.vectors)
    write_vectors(args.output, Y, batch.labels, delimiter=args.delimiter)
    if args.save_matrix:
        save_matrix(A, args.save_matrix)
    h = hashlib.sha256(A.supports.tobytes() + A.signs.tobytes()).hexdigest()[:16]
    print(f"d={A.d} m={A.m} s={A.s} seed={args.seed} digest={h} vectors={len(batch)}")
    return EXIT_OK


def _test_vector(args, m, seed):
    if args.x_file:
        batch = read_vectors(args.x_file, delimiter=args.delimiter)
        x = batch.vectors[0]
        if x.size != m:
            raise ParameterError("x-file", f"vector has length {x.size}, expected --m {m}")
        norm = np.linalg.norm(x)
        if norm == 0:
            raise ParameterError("x-file", "zero vector")
        return x / norm
    return fixed_test_vector(m, args.x, seed)


def cmd_verify(args) -> int:
    kind = args.experiment
    trials = args.trials if args.trials is not None else _DEFAULT_TRIALS[kind]
    workers = args.threads
    if kind == "djl":
        params = _resolve_params(args, require_eps=True)
        x = None if args.x == "random" and not args.x_file else _test_vector(args, args.m, args.seed)
        report = experiments.run_djl(params, args.m, trials, args.seed, x=x, workers=workers,
                                     raw_dump=args.raw_dump)
    elif kind == "moments":
        params = _resolve_params(args)
        report = experiments.run_moments(params, trials, args.seed, raw_dump=args.raw_dump)
    else:
        params = _resolve_params(args)
        x = _test_vector(args, args.m, args.seed)
        if kind == "tails":
            report = experiments.run_tails(params, args.m, x, trials, args.seed, eps_grid=args.eps_grid,
                                           exact=args.exact, workers=workers, raw_dump=args.raw_dump)
        elif kind == "mgf":
            report = experiments.run_mgf(params, args.m, x, trials, args.seed, t_grid=args.t_grid,
                                         exact=args.exact, workers=workers, raw_dump=args.raw_dump)
        else:
            report = experiments.run_baseline(params, args.m, x, trials, args.seed, workers=workers)

    if args.report:
        report.write(args.report)
    else:
        print(report.to_json())
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for v in report.verdicts:
        status = "PASS" if v.passed else "FAIL"
        print(f"[{status}] {v.criterion}: value={v.value} threshold={v.threshold}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_VERDICT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sscjl", description="Sparse sign-consistent JL transform")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="derive (d, s) from (eps, delta)")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("embed", help="embed a delimited file of vectors")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--delimiter", default=",")
    p.add_argument("--labeled", action="store_true", help="first field of each line is a label")
    p.add_argument("--save-matrix", type=Path, help="also write the sampled matrix (.npz)")
    _add_shape_args(p)
    _add_seed_arg(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("verify", help="run a Monte Carlo check and write a report")
    p.add_argument("experiment", choices=sorted(_DEFAULT_TRIALS))
    _add_shape_args(p)
    _add_seed_arg(p)
    p.add_argument("--m", type=int, default=1000, help="input dimension (default 1000)")
    p.add_argument("--trials", type=int)
    p.add_argument("--x", choices=("random", "uniform", "basis"), default="random",
                   help="test vector; for djl 'random' means a fresh vector per trial")
    p.add_argument("--x-file", type=Path, help="read the test vector from a delimited file")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--exact", action="store_true", help="compare against exact enumeration")
    p.add_argument("--eps-grid", type=_float_list, help="comma-separated tail thresholds")
    p.add_argument("--t-grid", type=_float_list, help="comma-separated MGF arguments")
    p.add_argument("--threads", type=int, default=1, help="worker threads for trials")
    p.add_argument("--report", type=Path, help="report path (default: stdout)")
    p.add_argument("--raw-dump", type=Path, help="per-trial newline-delimited JSON records")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except (DataError, ShapeError, NormalizationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
