"""Command-line front end: ``tbond <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import io
import importlib.resources
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bonding import is_t_bonded, minimal_bond_parameter, minimax_chain
from .cluster import cluster_at, counting_profile
from .criteria import check_m_regularity, check_rank_stabilization, check_regularity
from .errors import TbondError
from .generators import PRESETS, gen_cross_example, gen_cubic, gen_infinite_type, gen_punctured_grid, infinite_type_demo
from .geom import DEFAULT_TOL, TolerancePolicy
from .pointset import dump_pointset, estimate_R, estimate_r, load_pointset
from .symmetry import stabilizer

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def load_schema(name: str) -> dict:
    """One of the JSON schemas shipped with the package, e.g. ``"verdict"``."""
    text = importlib.resources.files("tbond").joinpath("schemas", f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)


def _jsonable(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def to_json(data) -> str:
    return json.dumps(data, indent=1, sort_keys=True, default=_jsonable) + "\n"


def to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(row.get(k)) for k in columns})
    return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(map(str, v))
    return v


def _length(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a decimal length: {text!r}")
    if not np.isfinite(v) or v < 0:
        raise argparse.ArgumentTypeError(f"length must be finite and non-negative: {text!r}")
    return v


def _positive(text: str) -> float:
    v = _length(text)
    if v == 0:
        raise argparse.ArgumentTypeError("length must be positive")
    return v


def _default_jobs() -> int:
    raw = os.environ.get("TBOND_JOBS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--jobs", type=int, default=_default_jobs(), help="worker threads (default: $TBOND_JOBS or 1)")
    common.add_argument("--seed", type=int, default=0, help="seed for sampled checks")
    common.add_argument("--eps-geom", type=_positive, default=DEFAULT_TOL.eps_geom)
    common.add_argument("--eps-rank", type=_positive, default=DEFAULT_TOL.eps_rank)

    p = argparse.ArgumentParser(prog="tbond", description="Local analysis of t-bonded point sets.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    g = sub.add_parser("generate", parents=[common], help="write a generated point set")
    g.add_argument("family", choices=("cubic", "cross", "punctured", "infinite"))
    g.add_argument("--dim", type=int, default=3, help="dimension of the cubic lattice")
    g.add_argument("--radius", type=_positive, default=6.0, help="window radius for periodic families")
    g.add_argument("--preset", default="paper-default", choices=sorted(PRESETS))
    g.add_argument("--truncation", type=int, help="half-length M of the infinite-type construction")

    a = sub.add_parser("analyze", parents=[common], help="Delone parameters and bonding")
    a.add_argument("input")
    a.add_argument("--t", type=_positive)

    c = sub.add_parser("clusters", parents=[common], help="cluster counting profile N(rho)")
    c.add_argument("input")
    c.add_argument("--rho-max", type=_positive, required=True)

    s = sub.add_parser("symmetry", parents=[common], help="stabilizer of one cluster")
    s.add_argument("input")
    s.add_argument("--rho0", type=_positive, required=True, help="cluster radius")
    s.add_argument("--index", type=int, help="center index (default: interior point nearest the window center)")

    for name, helptext in (("check-regular", "regularity verdict"), ("check-mregular", "multi-regularity verdict")):
        k = sub.add_parser(name, parents=[common], help=helptext)
        k.add_argument("input")
        k.add_argument("--t", type=_positive, required=True)
        k.add_argument("--rho0", type=_positive, required=True)
        k.add_argument("--strict", action="store_true", help="exit 1 when the criterion fails")

    r = sub.add_parser("rank-profile", parents=[common], help="cluster ranks at radii k*t")
    r.add_argument("input")
    r.add_argument("--t", type=_positive, required=True)
    r.add_argument("--strict", action="store_true", help="exit 1 when the criterion fails")

    ch = sub.add_parser("chain", parents=[common], help="minimax chain between two points")
    ch.add_argument("input")
    ch.add_argument("i", type=int)
    ch.add_argument("j", type=int)

    d = sub.add_parser("infinite-demo", parents=[common], help="infinite-type construction report")
    d.add_argument("--preset", default="paper-default", choices=sorted(PRESETS))
    d.add_argument("--epsilon", type=_positive)
    d.add_argument("--truncation", type=int)
    return p


def _tol(args) -> TolerancePolicy:
    return TolerancePolicy(eps_geom=args.eps_geom, eps_rank=args.eps_rank, quant=max(DEFAULT_TOL.quant, 10 * args.eps_geom))


def _load(args):
    path = Path(args.input)
    if not path.is_file():
        raise UsageError(f"input file not found: {args.input}")
    return load_pointset(path, tol=_tol(args))


def _params(args):
    params = PRESETS[args.preset]
    if args.truncation is not None:
        if args.truncation < 1:
            raise UsageError("--truncation must be a positive integer")
        params = params.with_truncation(args.truncation)
    return params


def _json_only(args):
    if args.format != "json":
        raise UsageError(f"{args.command} supports only --format json")


def cmd_generate(args):
    _json_only(args)
    tol = _tol(args)
    if args.family == "cubic":
        if args.dim < 1:
            raise UsageError("--dim must be positive")
        ps = gen_cubic(args.dim, args.radius, tol=tol)
    elif args.family == "cross":
        ps = gen_cross_example(args.radius, tol=tol)
    elif args.family == "punctured":
        ps = gen_punctured_grid(args.radius, tol=tol)
    else:
        ps = gen_infinite_type(_params(args), tol=tol)
    return dump_pointset(ps) + "\n", None


def cmd_analyze(args):
    _json_only(args)
    ps = _load(args)
    out = {"schema": "tbond.analysis/1", "n": len(ps), "dimension": ps.dim, "r": estimate_r(ps)}
    out["R"] = estimate_R(ps).to_dict()
    try:
        out["minimal_bond_parameter"] = minimal_bond_parameter(ps)
    except TbondError as exc:
        out["minimal_bond_parameter"] = None
        out["minimal_bond_parameter_error"] = exc.to_dict()
    if args.t is not None:
        out["bonded"] = is_t_bonded(ps, args.t).to_dict()
    return to_json(out), None


def cmd_clusters(args):
    ps = _load(args)
    prof = counting_profile(ps, args.rho_max, jobs=args.jobs)
    if args.format == "csv":
        return to_csv(prof.rows(), ["rho", "N", "interior_count", "boundary_excluded"]), None
    return to_json({"schema": "tbond.profile/1"} | prof.to_dict()), None


def cmd_symmetry(args):
    _json_only(args)
    ps = _load(args)
    i = ps.nearest_interior(args.rho0) if args.index is None else ps.check_index(args.index)
    c = cluster_at(ps, i, args.rho0)
    out = {
        "schema": "tbond.symmetry/1",
        "index": i,
        "rho": args.rho0,
        "cluster_size": len(c),
        "rank": c.rank,
        "boundary_truncated": c.boundary_truncated,
        "group": stabilizer(c).to_dict(),
    }
    return to_json(out), None


def _verdict(args, verdict):
    _json_only(args)
    code = EXIT_FAILED if args.strict and verdict.passed is not True else EXIT_OK
    return to_json(verdict.to_dict()), code


def cmd_check_regular(args):
    return _verdict(args, check_regularity(_load(args), args.t, args.rho0, jobs=args.jobs, seed=args.seed))


def cmd_check_mregular(args):
    return _verdict(args, check_m_regularity(_load(args), args.t, args.rho0, jobs=args.jobs))


def cmd_rank_profile(args):
    verdict = check_rank_stabilization(_load(args), args.t)
    if args.format == "csv":
        code = EXIT_FAILED if args.strict and verdict.passed is not True else EXIT_OK
        return to_csv(verdict.evidence["profile"], ["k", "rho", "ranks", "center_independent"]), code
    return _verdict(args, verdict)


def cmd_chain(args):
    _json_only(args)
    ps = _load(args)
    chain = minimax_chain(ps, args.i, args.j)
    return to_json({"schema": "tbond.chain/1"} | chain.to_dict()), None


def cmd_infinite_demo(args):
    report = infinite_type_demo(_params(args), epsilon=args.epsilon, jobs=args.jobs)
    if args.format == "csv":
        return to_csv(report.windows, ["M", "N_kt", "N_kt_eps", "interior_count"]), None
    return to_json(report.to_dict()), None


COMMANDS = {
    "generate": cmd_generate,
    "analyze": cmd_analyze,
    "clusters": cmd_clusters,
    "symmetry": cmd_symmetry,
    "check-regular": cmd_check_regular,
    "check-mregular": cmd_check_mregular,
    "rank-profile": cmd_rank_profile,
    "chain": cmd_chain,
    "infinite-demo": cmd_infinite_demo,
}


def _error(kind: str, message: str, details: dict | None = None) -> None:
    body = {"error": kind, "message": message}
    if details:
        body["details"] = details
    sys.stderr.write(to_json(body))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if args.jobs < 1:
        _error("usage", "--jobs must be at least 1")
        return EXIT_USAGE
    try:
        text, code = COMMANDS[args.command](args)
    except UsageError as exc:
        _error("usage", str(exc))
        return EXIT_USAGE
    except TbondError as exc:
        _error(exc.code, str(exc), exc.details)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        _error("input", str(exc))
        return EXIT_USAGE
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
