"""Command-line entry point: generate, solve, cluster, eval.

Exit codes: 0 success, 1 input error, 2 exhausted or degraded run.
JSON outputs are sorted and carry no timing data, so repeated runs with the
same seed are byte-identical.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .balanced_cut import SolverConfig, estimate_alpha, solve_balanced_cut
from .graph_core import Graph, Partition, cut_value, read_edge_list, read_partition, write_edge_list
from .hierarchy import TreeError, dasgupta_cost, hsm_tree, read_tree, recursive_cluster, write_tree
from .instance_gen import (AddClique, AddWithin, AdversaryScript, RemoveCut, SemiRandomSpec,
                           generate_hsm, generate_semirandom, save_instance)
from .rng import default_seed

EXIT_OK, EXIT_INPUT, EXIT_DEGRADED = 0, 1, 2

# SolverConfig fields that accept "none"
_OPTIONAL = {"taylor_p": int, "sketch_dim": int, "R": int, "sigma": float, "flatness_divisor": float}


class InputError(Exception):
    pass


def _dump(obj, path=None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=1, default=_jsonable) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _jsonable(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serialisable: {type(x).__name__}")


def _optional(kind):
    def parse(text):
        return None if text.lower() == "none" else kind(text)
    return parse


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver constants (echoed into the output JSON)")
    for f in dataclasses.fields(SolverConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.name in _OPTIONAL:
            g.add_argument(flag, type=_optional(_OPTIONAL[f.name]), default=f.default, metavar="X|none")
        elif isinstance(f.default, bool):
            g.add_argument(flag, action=argparse.BooleanOptionalAction, default=f.default)
        else:
            g.add_argument(flag, type=type(f.default), default=f.default)


def _solver_config(args) -> SolverConfig:
    return SolverConfig(**{f.name: getattr(args, f.name) for f in dataclasses.fields(SolverConfig)})


def _seed(args) -> int:
    return default_seed() if args.seed is None else int(args.seed)


def _threads(args) -> None:
    if getattr(args, "threads", None):
        import numba

        numba.set_num_threads(max(1, min(int(args.threads), numba.config.NUMBA_NUM_THREADS)))


def _read_graph(path) -> Graph:
    try:
        return read_edge_list(path)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read graph {path}: {exc}") from exc


# ---------------------------------------------------------------- commands


def _adversary(args) -> AdversaryScript:
    if args.adversary:
        try:
            return AdversaryScript.from_json(Path(args.adversary).read_text())
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise InputError(f"bad adversary script {args.adversary}: {exc}") from exc
    acts = []
    for side in args.add_clique or []:
        acts.extend([AddClique("A"), AddClique("B")] if side == "both" else [AddClique(side)])
    for side, dens in args.add_within or []:
        acts.append(AddWithin(side, density=float(dens)))
    if args.remove_cut is not None:
        acts.append(RemoveCut(fraction=args.remove_cut))
    return AdversaryScript(acts)


def cmd_generate(args) -> int:
    seed = _seed(args)
    out = Path(args.out)
    if args.model == "semirandom":
        if args.spec:
            try:
                spec = SemiRandomSpec.from_dict(json.loads(Path(args.spec).read_text()))
            except (OSError, ValueError, KeyError, TypeError) as exc:
                raise InputError(f"bad spec file {args.spec}: {exc}") from exc
            if args.seed is not None:
                spec = dataclasses.replace(spec, seed=seed)
        else:
            if args.n is None or args.a is None or args.eta is None:
                raise InputError("semirandom generation needs --n, --a and --eta (or --spec)")
            spec = SemiRandomSpec(args.n, args.a, args.eta, adversary=_adversary(args), seed=seed)
        try:
            spec.validate()
            inst = generate_semirandom(spec)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        edges, side = save_instance(inst, out)
        _dump({"model": "semirandom", "seed": seed, "n": inst.graph.n, "m": inst.graph.m,
               "planted_cut_value": inst.planted_cut_value, "alpha_bound": inst.alpha_bound,
               "edges": str(edges), "sidecar": str(side)})
        return EXIT_OK
    tree_path = args.tree
    try:
        if tree_path:
            tree = read_tree(tree_path)
        else:
            if args.n is None or not args.levels:
                raise InputError("hsm generation needs --tree, or --n with --levels")
            levels = [float(x) for x in args.levels.split(",")]
            leaf = levels[-1] if args.leaf_weight is None else args.leaf_weight
            tree = hsm_tree(args.n, levels, leaf, seed)
            tree_path = str(out.with_suffix(".tree"))
            write_tree(tree, tree_path)
        g = generate_hsm(tree, seed)
    except (OSError, ValueError) as exc:
        raise InputError(f"bad tree {tree_path}: {exc}") from exc
    edges = out.with_suffix(".edges")
    write_edge_list(g, edges)
    meta = {"model": "hsm", "seed": seed, "n": g.n, "m": g.m, "tree": str(tree_path)}
    out.with_suffix(".json").write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    _dump({**meta, "edges": str(edges), "sidecar": str(out.with_suffix(".json"))})
    return EXIT_OK


def cmd_solve(args) -> int:
    g = _read_graph(args.graph)
    seed = _seed(args)
    cfg = _solver_config(args)
    if not 0 < args.a <= 0.5:
        raise InputError("--a must lie in (0, 1/2]")
    log = open(args.log, "w") if args.log else None
    try:
        if args.auto_alpha:
            alpha, res = estimate_alpha(g, args.a, seed=seed, config=cfg, kappa=args.kappa)
            if res is None:
                raise InputError("graph has fewer than two vertices")
        else:
            if args.alpha is None:
                raise InputError("give --alpha or --auto-alpha")
            alpha = args.alpha
            res = solve_balanced_cut(g, args.a, alpha, args.kappa, args.delta, seed, cfg, log=log)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    finally:
        if log is not None:
            log.close()
    out = res.to_json()
    out.update(command="solve", alpha_estimate=float(alpha) if args.auto_alpha else None,
               graph={"n": g.n, "m": g.m})
    if args.partition_out:
        Path(args.partition_out).write_text("".join(f"{int(s)}\n" for s in res.partition.side))
    _dump(out, args.json_out)
    return EXIT_DEGRADED if res.exhausted else EXIT_OK


def cmd_cluster(args) -> int:
    g = _read_graph(args.graph)
    seed = _seed(args)
    cfg = _solver_config(args)
    try:
        rep = recursive_cluster(g, args.size_floor, cfg, seed, D=args.D)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if args.tree_out:
        write_tree(rep.tree, args.tree_out)
    degraded = any(e.get("degraded") for e in rep.levels)
    _dump({"command": "cluster", "cost": rep.cost, "levels": rep.levels, "seed": seed,
           "size_floor": args.size_floor, "D": args.D, "degraded": degraded, "graph": {"n": g.n, "m": g.m},
           "config": cfg.to_dict()}, args.json_out)
    return EXIT_DEGRADED if degraded else EXIT_OK


def cmd_eval(args) -> int:
    g = _read_graph(args.graph)
    if (args.partition is None) == (args.tree is None):
        raise InputError("give exactly one of --partition or --tree")
    out = {"command": "eval", "graph": {"n": g.n, "m": g.m}}
    try:
        if args.partition is not None:
            part = read_partition(args.partition)
            if part.side.size != g.n:
                raise InputError(f"partition has {part.side.size} labels, graph has {g.n} vertices")
            out.update(cut_value=cut_value(g, part), balance=part.balance(),
                       sides=part.counts.astype(int).tolist())
        else:
            tree = read_tree(args.tree)
            if tree.n != g.n:
                raise InputError(f"tree has {tree.n} leaves, graph has {g.n} vertices")
            out["dasgupta_cost"] = dasgupta_cost(tree, g)
    except (OSError, TreeError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    side = Path(args.sidecar) if args.sidecar else Path(args.graph).with_suffix(".json")
    if side.exists():
        meta = json.loads(side.read_text())
        if "planted" in meta and len(meta["planted"]) == g.n:
            planted = Partition(np.asarray(meta["planted"], np.int8))
            pv = cut_value(g, planted)
            out["planted"] = {"cut_value": pv, "balance": planted.balance()}
            if "cut_value" in out:
                out["planted"]["ratio"] = out["cut_value"] / pv if pv else None
    _dump(out, args.json_out)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="semicut", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    sub = p.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a random instance")
    gen.add_argument("--model", choices=["semirandom", "hsm"], default="semirandom")
    gen.add_argument("--n", type=int)
    gen.add_argument("--a", type=float)
    gen.add_argument("--eta", type=float)
    gen.add_argument("--spec", help="SemiRandomSpec JSON file")
    gen.add_argument("--adversary", help="adversary script JSON file")
    gen.add_argument("--add-clique", action="append", choices=["A", "B", "both"])
    gen.add_argument("--add-within", action="append", nargs=2, metavar=("SIDE", "DENSITY"))
    gen.add_argument("--remove-cut", type=float)
    gen.add_argument("--tree", help="generating tree file (hsm model)")
    gen.add_argument("--levels", help="comma-separated weights from the root down (hsm model)")
    gen.add_argument("--leaf-weight", type=float, help="weight below the listed levels (hsm model)")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out", default="instance", help="output prefix")
    gen.set_defaults(func=cmd_generate)

    sol = sub.add_parser("solve", help="balanced cut of a graph")
    sol.add_argument("graph")
    sol.add_argument("--a", type=float, required=True)
    grp = sol.add_mutually_exclusive_group()
    grp.add_argument("--alpha", type=float)
    grp.add_argument("--auto-alpha", action="store_true")
    sol.add_argument("--kappa", type=float, default=1.0)
    sol.add_argument("--delta", type=float, default=None, help="final scale (default 1/ln n)")
    sol.add_argument("--seed", type=int)
    sol.add_argument("--json-out", default="-")
    sol.add_argument("--partition-out")
    sol.add_argument("--log", help="per-iteration JSON lines")
    _add_solver_flags(sol)
    sol.set_defaults(func=cmd_solve)

    clu = sub.add_parser("cluster", help="hierarchical clustering by recursive balanced cuts")
    clu.add_argument("graph")
    clu.add_argument("--size-floor", type=int, default=None)
    clu.add_argument("--D", type=float, default=None, help="cut scale kappa = 1/sqrt(D); default ceil(ln n)")
    clu.add_argument("--seed", type=int)
    clu.add_argument("--tree-out")
    clu.add_argument("--json-out", default="-")
    _add_solver_flags(clu)
    clu.set_defaults(func=cmd_cluster)

    ev = sub.add_parser("eval", help="score a partition or a tree")
    ev.add_argument("graph")
    ev.add_argument("--partition")
    ev.add_argument("--tree")
    ev.add_argument("--sidecar")
    ev.add_argument("--json-out", default="-")
    ev.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; here 2 means a degraded run
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        _threads(args)
        return args.func(args)
    except InputError as exc:
        print(f"semicut: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
