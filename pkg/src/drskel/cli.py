"""Command-line experiment driver.

Subcommands: generate, contaminate, learn-skeleton, learn-dag, evaluate,
sweep, diagnostics.  Every output file starts with '#'-prefixed metadata
lines (or a "meta" JSON field) echoing the flags and seeds that produced
it, and identical invocations produce byte-identical outputs.

Exit codes: 0 success, 2 usage error, 3 data/format error, 4 solver
failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import bayesnet as bn
from .contamination import ContaminationConfig, NoiseModel, contaminate
from .encoding import EncodingScheme, scheme_from_name
from .erm import ErmConfig
from .errors import (
    DimensionError,
    DivergenceError,
    DrskelError,
    InvariantError,
    NetworkFormatError,
    SingularHessianError,
    StateSpaceTooLargeError,
)
from .evaluation import bic_heldout, f1_skeleton
from .hillclimb import hill_climb
from .kl import KlConfig
from .moments import diagnostics, solve_surrogate
from .skeleton import Skeleton, learn_skeleton
from .wasserstein import AdamConfig, WassersteinConfig

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_SOLVER = 4

METRICS_COLUMNS = [
    "dataset", "n", "m", "noise", "zeta", "estimator", "hyper",
    "threshold", "f1", "bic", "runtime_ms", "seed",
]


def _resolve_network(spec: str) -> bn.DiscreteBayesNet:
    path = Path(spec)
    if path.exists():
        return bn.load_network(path)
    return bn.load_fixture(spec)


def _meta_lines(meta: dict) -> list[str]:
    return [f"# {k}: {meta[k]}" for k in sorted(meta)]


def _write_json(path: str, obj: dict) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _echo_args(args: argparse.Namespace, skip=("func",)) -> dict:
    out = {}
    for key, value in vars(args).items():
        if key in skip or value is None:
            continue
        out[key] = value if not isinstance(value, float) else repr(value)
    return out


def _make_estimator(args, seed: int):
    name = args.estimator
    if name == "reg":
        return ErmConfig(lam=args.lam)
    if name == "kl":
        return KlConfig(epsilon0=args.epsilon0, epsilon=args.epsilon)
    if name == "wass":
        return WassersteinConfig(
            epsilon0=args.epsilon0,
            epsilon=args.epsilon,
            inner_starts=args.inner_starts,
            seed=seed,
            adam=AdamConfig(lr=args.lr, iters=args.iters, batch=args.batch),
        )
    raise ValueError(f"unknown estimator {name!r}")


def _add_estimator_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--estimator", choices=["wass", "kl", "reg"], default="kl")
    p.add_argument("--lambda", dest="lam", type=float, default=0.05,
                   help="block l2,1 penalty for --estimator reg")
    p.add_argument("--epsilon0", type=float, default=0.5,
                   help="ambiguity radius numerator; radius = epsilon0 / m")
    p.add_argument("--epsilon", type=float, default=None,
                   help="ambiguity radius used verbatim (overrides --epsilon0)")
    p.add_argument("--batch", type=int, default=500)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--inner-starts", dest="inner_starts", type=int, default=10)
    p.add_argument("--lr", type=float, default=1.0)
    p.add_argument("--threshold", type=float, default=1e-2)
    p.add_argument("--aggregate", choices=["union", "intersection"], default="union")
    p.add_argument("--encoding", choices=["dummy", "effects"], default="dummy")
    p.add_argument("--seed", type=int, default=0)


def _add_noise_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--noise", choices=["none", "huber", "independent"], default="none")
    p.add_argument("--zeta", type=float, default=0.0)
    p.add_argument("--adversary-seed", dest="adversary_seed", type=int, default=0)
    p.add_argument("--adversary-k", dest="adversary_k", type=int, default=20)
    p.add_argument("--uniform-failure", dest="uniform_failure", action="store_true")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.m < 1:
        raise UsageError("--m must be >= 1")
    if args.random is not None:
        n, max_parents = args.random
        cards = [args.cards] * n if isinstance(args.cards, int) else args.cards
        net = bn.random_network(n, max_parents, cards, seed=args.seed)
    else:
        if args.net is None:
            raise UsageError("provide --net or --random")
        net = _resolve_network(args.net)
    data = bn.sample(net, args.m, seed=args.seed)
    meta = _echo_args(args)
    bn.save_dataset(data, args.out, names=list(net.names), meta=meta)
    return EXIT_OK


def cmd_contaminate(args) -> int:
    data = bn.load_dataset(args.data)
    names = bn.dataset_names(args.data)
    cfg = ContaminationConfig(
        model=NoiseModel(args.noise),
        zeta=args.zeta,
        seed=args.adversary_seed,
        uniform_failure=args.uniform_failure,
    )
    noisy = contaminate(data, cfg)
    bn.save_dataset(noisy, args.out, names=names, meta=_echo_args(args))
    return EXIT_OK


def _skeleton_to_file(skel: Skeleton, names, path, meta) -> None:
    obj = skel.to_dict(names)
    obj["meta"] = meta
    _write_json(path, obj)


def _skeleton_from_file(path) -> tuple[Skeleton, list[str]]:
    obj = json.loads(Path(path).read_text())
    names = obj.get("names")
    if names is None:
        seen = []
        for u, v in obj["edges"]:
            for x in (u, v):
                if x not in seen:
                    seen.append(x)
        names = seen
    index = {name: i for i, name in enumerate(names)}
    edges = frozenset(
        frozenset((index[u], index[v])) for u, v in obj["edges"]
    )
    scores = {}
    for key, val in obj.get("scores", {}).items():
        a, b = key.split("->")
        scores[(index[a], index[b])] = float(val)
    return Skeleton(n=obj.get("n", len(names)), edges=edges, scores=scores), list(names)


def cmd_learn_skeleton(args) -> int:
    data = bn.load_dataset(args.data)
    names = bn.dataset_names(args.data)
    scheme = scheme_from_name(args.encoding)
    estimator = _make_estimator(args, args.seed)
    skel = learn_skeleton(
        data, estimator, threshold=args.threshold, scheme=scheme,
        aggregate=args.aggregate,
    )
    meta = _echo_args(args)
    _skeleton_to_file(skel, names, args.out, meta)
    sidecar = args.diagnostics_out or (str(args.out) + ".diagnostics.json")
    reports = {}
    for r in range(data.n):
        nbrs = {i for i in range(data.n) if frozenset((r, i)) in skel.edges}
        try:
            w_ref = solve_surrogate(data, r, nbrs, scheme)
            reports[names[r]] = diagnostics(data, r, w_ref, nbrs, scheme).to_dict()
        except SingularHessianError as exc:
            reports[names[r]] = {"error": str(exc), "lambda_min": exc.lambda_min}
    _write_json(sidecar, {"meta": meta, "nodes": reports})
    return EXIT_OK


def cmd_learn_dag(args) -> int:
    data = bn.load_dataset(args.data)
    names = bn.dataset_names(args.data)
    skel = None
    if args.skeleton:
        skel, skel_names = _skeleton_from_file(args.skeleton)
        if skel.n != data.n:
            raise DimensionError(
                f"skeleton covers {skel.n} nodes but data has {data.n}"
            )
    dag = hill_climb(data, skeleton=skel, seed=args.seed, restarts=args.hc_restarts)
    obj = {
        "meta": _echo_args(args),
        "names": names,
        "edges": [[names[u], names[v]] for u, v in sorted(dag.edges)],
    }
    _write_json(args.out, obj)
    return EXIT_OK


def _dag_from_file(path) -> tuple[bn.Dag, list[str]]:
    obj = json.loads(Path(path).read_text())
    names = obj["names"]
    index = {name: i for i, name in enumerate(names)}
    edges = frozenset((index[u], index[v]) for u, v in obj["edges"])
    return bn.Dag(n=len(names), edges=edges), list(names)


def cmd_evaluate(args) -> int:
    truth = _resolve_network(args.truth) if args.truth else None
    f1 = ""
    bic = ""
    n = ""
    m = ""
    if args.skeleton:
        skel, names = _skeleton_from_file(args.skeleton)
        if truth is None:
            raise UsageError("--truth is required to score a skeleton")
        if skel.n != truth.n:
            raise DimensionError(
                f"skeleton covers {skel.n} nodes but truth has {truth.n}"
            )
        order = {name: i for i, name in enumerate(names)}
        truth_edges = {
            frozenset((order[truth.names[u]], order[truth.names[v]]))
            for u, v in (tuple(e) for e in truth.skeleton_edges())
        }
        f1 = repr(f1_skeleton(skel, truth_edges, skel.n))
        n = truth.n
    if args.dag:
        dag, names = _dag_from_file(args.dag)
        if args.train is None or args.test is None:
            raise UsageError("--train and --test are required to score a DAG")
        train = bn.load_dataset(args.train)
        test = bn.load_dataset(args.test)
        bic = repr(bic_heldout(dag, train, test, alpha_smooth=args.alpha,
                               bic_on=args.bic_on))
        n = dag.n
        m = train.m + test.m
    if not args.skeleton and not args.dag:
        raise UsageError("provide --skeleton and/or --dag")
    row = {
        "dataset": args.dataset_name,
        "n": n, "m": m,
        "noise": args.noise, "zeta": repr(args.zeta),
        "estimator": args.estimator_name, "hyper": "", "threshold": "",
        "f1": f1, "bic": bic, "runtime_ms": "", "seed": args.seed,
    }
    lines = _meta_lines(_echo_args(args))
    lines.append(",".join(METRICS_COLUMNS))
    lines.append(",".join(str(row[c]) for c in METRICS_COLUMNS))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_diagnostics(args) -> int:
    scheme = scheme_from_name(args.encoding)
    if args.net:
        net = _resolve_network(args.net)
        source = net
        names = list(net.names)
        neighbor_sets = net.neighbor_sets()
    else:
        if not args.data or not args.truth:
            raise UsageError("provide --net, or --data together with --truth")
        source = bn.load_dataset(args.data)
        names = bn.dataset_names(args.data)
        truth = _resolve_network(args.truth)
        if truth.n != source.n:
            raise DimensionError("truth network does not match the data")
        neighbor_sets = truth.neighbor_sets()
    reports = {}
    for r in range(len(names)):
        nbrs = neighbor_sets[r]
        w_ref = solve_surrogate(source, r, nbrs, scheme)
        reports[names[r]] = diagnostics(source, r, w_ref, nbrs, scheme).to_dict()
    _write_json(args.out, {"meta": _echo_args(args), "nodes": reports})
    return EXIT_OK


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------

def _as_list(x):
    return x if isinstance(x, list) else [x]


def _sweep_cells(config: dict) -> list[dict]:
    """Cartesian grid over the list-valued axes, one dict per cell."""
    cells = []
    for m in _as_list(config.get("m", 1000)):
        for noise in _as_list(config.get("noise", "none")):
            zetas = _as_list(config.get("zeta", 0.0)) if noise != "none" else [0.0]
            for zeta in zetas:
                for est in _as_list(config.get("estimator", "kl")):
                    hypers = (
                        _as_list(config.get("lambda", 0.05))
                        if est == "reg"
                        else _as_list(config.get("epsilon0", 0.5))
                    )
                    for hyper in hypers:
                        for tau in _as_list(config.get("threshold", 1e-2)):
                            cells.append({
                                "m": int(m), "noise": noise, "zeta": float(zeta),
                                "estimator": est, "hyper": float(hyper),
                                "threshold": float(tau),
                            })
    return cells


def _run_sweep_cell(payload) -> dict:
    config, cell, seed = payload
    net = _resolve_network(config["network"])
    scheme = scheme_from_name(config.get("encoding", "dummy"))
    t0 = time.perf_counter()
    data = bn.sample(net, cell["m"], seed=seed)
    if cell["noise"] != "none":
        noise_cfg = ContaminationConfig(
            model=NoiseModel(cell["noise"]),
            zeta=cell["zeta"],
            seed=seed + int(config.get("adversary_seed_offset", 10**6)),
            uniform_failure=bool(config.get("uniform_failure", False)),
        )
        data = contaminate(data, noise_cfg)
    if cell["estimator"] == "reg":
        est = ErmConfig(lam=cell["hyper"])
    elif cell["estimator"] == "kl":
        est = KlConfig(epsilon0=cell["hyper"])
    else:
        est = WassersteinConfig(
            epsilon0=cell["hyper"],
            inner_starts=int(config.get("inner_starts", 10)),
            seed=seed,
            adam=AdamConfig(
                lr=float(config.get("lr", 1.0)),
                iters=int(config.get("iters", 200)),
                batch=int(config.get("batch", 500)),
            ),
        )
    skel = learn_skeleton(
        data, est, threshold=cell["threshold"], scheme=scheme,
        aggregate=config.get("aggregate", "union"),
    )
    truth_edges = net.skeleton_edges()
    f1 = f1_skeleton(skel, truth_edges, net.n)
    bic = ""
    if config.get("with_dag", False):
        dag = hill_climb(data, skeleton=skel)
        half = data.m // 2
        train = bn.Dataset(cards=data.cards, rows=data.rows[:half])
        test = bn.Dataset(cards=data.cards, rows=data.rows[half:])
        bic = repr(bic_heldout(dag, train, test))
    runtime_ms = (time.perf_counter() - t0) * 1000.0
    return {
        "dataset": str(config["network"]), "n": net.n, "m": cell["m"],
        "noise": cell["noise"], "zeta": repr(cell["zeta"]),
        "estimator": cell["estimator"], "hyper": repr(cell["hyper"]),
        "threshold": repr(cell["threshold"]),
        "f1": repr(f1), "bic": bic, "runtime_ms": runtime_ms, "seed": seed,
    }


def cmd_sweep(args) -> int:
    config = json.loads(Path(args.config).read_text())
    if "network" not in config:
        raise UsageError("sweep config must name a 'network'")
    seeds = config.get("seeds", list(range(10)))
    if not isinstance(seeds, list):
        seeds = list(range(int(seeds)))
    cells = _sweep_cells(config)
    if not cells or not seeds:
        raise UsageError("sweep grid is empty")
    jobs = [(config, cell, int(seed)) for cell in cells for seed in seeds]
    if args.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_run_sweep_cell, jobs, chunksize=1))
    else:
        results = [_run_sweep_cell(job) for job in jobs]

    lines = _meta_lines({"config": json.dumps(config, sort_keys=True),
                         "workers": args.workers, "timings": args.timings})
    lines.append(",".join(METRICS_COLUMNS))
    per_cell: dict[tuple, list] = {}
    for job, row in zip(jobs, results):
        runtime = repr(row["runtime_ms"]) if args.timings else ""
        row = dict(row, runtime_ms=runtime)
        lines.append(",".join(str(row[c]) for c in METRICS_COLUMNS))
        key = tuple(sorted(job[1].items()))
        per_cell.setdefault(key, []).append((row, float(row["f1"])))
    for key in per_cell:
        rows = per_cell[key]
        f1s = np.asarray([f for _, f in rows])
        base = dict(rows[0][0])
        for stat, value in (("mean", f1s.mean()), ("std", f1s.std(ddof=0))):
            agg = dict(base, f1=repr(float(value)), bic="", runtime_ms="", seed=stat)
            lines.append(",".join(str(agg[c]) for c in METRICS_COLUMNS))
    Path(args.out).write_text("\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser / entry point
# ---------------------------------------------------------------------------

class UsageError(DrskelError):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drskel",
        description="Skeleton learning for discrete Bayesian networks "
                    "with distributionally robust node-wise regressions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a dataset from a network")
    p.add_argument("--net", help="network JSON path or bundled fixture name")
    p.add_argument("--random", nargs=2, type=int, metavar=("N", "MAX_PARENTS"),
                   help="generate a random network instead of loading one")
    p.add_argument("--cards", type=int, default=2,
                   help="cardinality for --random networks")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("contaminate", help="corrupt a dataset")
    p.add_argument("data")
    _add_noise_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_contaminate)

    p = sub.add_parser("learn-skeleton", help="estimate the undirected skeleton")
    p.add_argument("data")
    _add_estimator_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--diagnostics-out", dest="diagnostics_out", default=None)
    p.set_defaults(func=cmd_learn_skeleton)

    p = sub.add_parser("learn-dag", help="hill-climb a DAG under BIC")
    p.add_argument("data")
    p.add_argument("--skeleton", default=None,
                   help="restrict edges to this skeleton JSON")
    p.add_argument("--hc-restarts", dest="hc_restarts", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_learn_dag)

    p = sub.add_parser("evaluate", help="score skeletons and DAGs")
    p.add_argument("--skeleton", default=None)
    p.add_argument("--dag", default=None)
    p.add_argument("--truth", default=None,
                   help="truth network path or fixture name")
    p.add_argument("--train", default=None)
    p.add_argument("--test", default=None)
    p.add_argument("--alpha", type=float, default=1.0,
                   help="additive smoothing for held-out CPTs")
    p.add_argument("--bic-on", dest="bic_on", choices=["test", "full"],
                   default="test")
    p.add_argument("--dataset-name", dest="dataset_name", default="")
    p.add_argument("--estimator-name", dest="estimator_name", default="")
    p.add_argument("--noise", default="none")
    p.add_argument("--zeta", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="grid experiment driven by a JSON config")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timings", action="store_true",
                   help="record wall-clock runtimes (breaks byte-identity)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("diagnostics", help="assumption diagnostics per node")
    p.add_argument("--net", default=None,
                   help="network for exact-enumeration diagnostics")
    p.add_argument("--data", default=None)
    p.add_argument("--truth", default=None,
                   help="truth network naming the neighbor sets for --data")
    p.add_argument("--encoding", choices=["dummy", "effects"], default="dummy")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diagnostics)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NetworkFormatError, InvariantError, DimensionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DivergenceError, SingularHessianError, StateSpaceTooLargeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
