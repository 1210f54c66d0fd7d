"""Command-line entry points: every capability behind reproducible flags.

Data outputs are deterministic given --seed; every file output gets a
RunManifest JSON sibling recording the exact invocation.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from . import __version__
from .bench import BenchScenario, default_scenarios, run_benchmark, write_csv
from .cumulants import cumulants_from_moments, moments_of_prior, scaled_cumulants
from .ergm import (
    ErgmModel,
    FitConfig,
    PriorTable,
    er_prior,
    fit_newton,
    prior_table,
)
from .errors import DataError, GraphPriorError
from .graphs import (
    enumerate_basis,
    enumerate_nonisomorphic,
    graph_from_json,
    graph_to_json,
    injective_count,
    pair_count,
)
from .mcmcp import (
    ChainConfig,
    build_transition_matrix,
    er_mixing_time,
    mixing_time,
    simulate_chains,
)
from .pipeline import (
    STORIES,
    ResponseRecord,
    aggregate,
    apply_exclusions,
    cross_validate,
    dump_records,
    fit_edge_only,
    generalization_matrix,
    load_records,
)


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    inputs: list
    outputs: list
    version: str
    wall_time_seconds: float

    def write(self, out_path: str) -> None:
        with open(str(out_path) + ".manifest.json", "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _manifest(args, outputs, started, inputs=()):
    flags = {
        k: v
        for k, v in vars(args).items()
        if k not in ("func", "command") and v is not None
    }
    m = RunManifest(
        command=args.command,
        config=flags,
        seed=getattr(args, "seed", None),
        inputs=[str(p) for p in inputs],
        outputs=[str(p) for p in outputs],
        version=__version__,
        wall_time_seconds=round(time.monotonic() - started, 3),
    )
    for out in outputs:
        m.write(out)


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _n_obs_from_flags(args, n: int) -> int:
    m = pair_count(n)
    if args.shown is not None:
        if not 0 <= args.shown <= m:
            raise DataError(f"--shown must be in [0, {m}] for n={n}")
        return m - args.shown
    b = args.b if args.b is not None else 0.5
    if not 0.0 <= b <= 1.0:
        raise DataError("--b must be in [0, 1]")
    return round(b * m)


def _load_prior(path) -> PriorTable:
    """Accept a prior table {n, probs}, a model {n, r, basis, beta}, or a
    fit output (same keys as a model)."""
    with open(path) as fh:
        obj = json.load(fh)
    if "probs" in obj:
        return PriorTable(int(obj["n"]), np.asarray(obj["probs"], dtype=float))
    if "beta" in obj:
        n, r = int(obj["n"]), int(obj["r"])
        model = ErgmModel.with_order(n, r, np.asarray(obj["beta"], dtype=float))
        return prior_table(model)
    raise DataError(f"{path}: neither a prior table nor a model")


# ---------------------------------------------------------------------------
# commands


def cmd_enumerate(args) -> int:
    print(len(enumerate_nonisomorphic(args.nodes)))
    return 0


def cmd_basis(args) -> int:
    started = time.monotonic()
    basis = enumerate_basis(args.order, args.nodes)
    rows = [
        {"index": i, "nodes": g.n, "edge_count": g.edge_count, **graph_to_json(g)}
        for i, g in enumerate(basis)
    ]
    if args.out:
        _write_json(args.out, rows)
        _manifest(args, [args.out], started)
    else:
        json.dump(rows, sys.stdout, indent=2, sort_keys=True)
        print()
    return 0


def cmd_density(args) -> int:
    with open(getattr(args, "in")) as fh:
        obj = json.load(fh)
    try:
        motif = graph_from_json(obj["motif"])
        host = graph_from_json(obj["graph"])
    except KeyError as exc:
        raise DataError(f"density input needs 'motif' and 'graph': {exc}") from exc
    hits, total = injective_count(motif, host)
    frac = Fraction(hits, total)
    out = {
        "numerator": frac.numerator,
        "denominator": frac.denominator,
        "value": float(frac),
    }
    print(json.dumps(out, sort_keys=True))
    return 0


def _load_dataset(args):
    records = load_records(getattr(args, "in"))
    kept, report = apply_exclusions(records)
    story = args.story or (kept[0].story if kept else None)
    if story is None:
        raise DataError("no records after exclusions")
    data = aggregate(kept, story, args.nodes)
    return data, report


def cmd_fit(args) -> int:
    started = time.monotonic()
    data, _ = _load_dataset(args)
    result = fit_newton(data, args.order, FitConfig(seed=args.seed))
    out = result.to_json()
    out["records"] = len(data)
    if args.out:
        _write_json(args.out, out)
        _manifest(args, [args.out], started, inputs=[getattr(args, "in")])
    else:
        print(json.dumps(out, sort_keys=True))
    return 0 if result.converged else 1


def cmd_simulate(args) -> int:
    started = time.monotonic()
    n = args.nodes
    n_obs = _n_obs_from_flags(args, n)
    if args.story and args.story not in STORIES:
        raise DataError(f"unknown story {args.story!r}; choose from {STORIES}")
    if getattr(args, "in", None):
        prior = _load_prior(getattr(args, "in"))
        if prior.n != n:
            raise DataError(f"prior is for n={prior.n}, asked for n={n}")
    else:
        prior = er_prior(n, 0.5)
    chains = args.chains or max(1, args.records // args.rounds)
    cfg = ChainConfig(n=n, n_obs=n_obs, rounds=args.rounds, chains=chains, seed=args.seed)
    data = simulate_chains(prior, cfg)
    story = args.story or "class"
    shown = pair_count(n) - n_obs
    records = [
        ResponseRecord(
            session_id=f"sim{item.chain_id:04d}",
            story=story,
            chain_id=f"chain{item.chain_id:04d}",
            round_index=item.round_index,
            n=n,
            pg=item.pg,
            response=item.response,
            # telemetry synthesized to pass the exclusion rules
            elapsed_seconds=3.0 * shown + 5.0,
            nodes_moved=n,
        )
        for item in data.records
    ]
    dump_records(args.out, records)
    _manifest(args, [args.out], started)
    return 0


def cmd_mixing(args) -> int:
    if args.er:
        b = args.b if args.b is not None else 0.5
        print(f"{er_mixing_time(b):.6f}")
        return 0
    if not getattr(args, "in", None):
        raise DataError("mixing needs --er or --in PRIOR")
    prior = _load_prior(getattr(args, "in"))
    n_obs = _n_obs_from_flags(args, prior.n)
    tau = mixing_time(build_transition_matrix(prior, n_obs))
    print(f"{tau:.6f}")
    return 0


def cmd_cumulants(args) -> int:
    started = time.monotonic()
    prior = _load_prior(getattr(args, "in"))
    basis = enumerate_basis(args.order, prior.n)
    mu = moments_of_prior(prior, basis)
    kappa = scaled_cumulants(cumulants_from_moments(mu), mu)
    rows = [
        {
            "index": i,
            "edge_count": g.edge_count,
            **graph_to_json(g),
            "moment": float(mu.values[i]),
            "cumulant": float(kappa.kappas[i]),
            "scaled_cumulant": float(kappa.scaled[i]) if kappa.scaled_valid else None,
        }
        for i, g in enumerate(basis)
    ]
    if args.out:
        _write_json(args.out, rows)
        _manifest(args, [args.out], started, inputs=[getattr(args, "in")])
    else:
        json.dump(rows, sys.stdout, indent=2, sort_keys=True)
        print()
    return 0


def cmd_crossval(args) -> int:
    started = time.monotonic()
    data, _ = _load_dataset(args)
    r_values = [int(r) for r in args.order.split(",")]
    result = cross_validate(
        data, r_values, splits=args.reps, seed=args.seed, by_chain=args.by_chain
    )
    out = {
        "selected_r": result.selected_r,
        "mean_avgll": {str(k): v for k, v in result.mean_avgll.items()},
        "sd_avgll": {str(k): v for k, v in result.sd_avgll.items()},
        "splits_used": {str(k): v for k, v in result.splits_used.items()},
        "failures": {str(k): v for k, v in result.failures.items()},
        "by_chain": result.by_chain,
    }
    if args.out:
        _write_json(args.out, out)
        _manifest(args, [args.out], started, inputs=[getattr(args, "in")])
    else:
        print(json.dumps(out, sort_keys=True))
    return 0


def cmd_genmatrix(args) -> int:
    started = time.monotonic()
    records = load_records(getattr(args, "in"))
    kept, _ = apply_exclusions(records)
    stories = sorted({r.story for r in kept})
    datasets = {s: aggregate(kept, s, args.nodes) for s in stories}
    gm = generalization_matrix(datasets, r=args.order, reps=args.reps, seed=args.seed)
    out_path = args.out or "genmatrix.csv"
    with open(out_path, "w") as fh:
        fh.write("test_story,train_story,cell\n")
        for i, test in enumerate(gm.stories):
            for j, train in enumerate(gm.stories):
                fh.write(f"{test},{train},{gm.values[i, j]:.6f}\n")
    _manifest(args, [out_path], started, inputs=[getattr(args, "in")])
    print(f"wrote {out_path} ({gm.reps_used} reps used, {gm.failures} failed)")
    return 0


def cmd_edgeonly(args) -> int:
    started = time.monotonic()
    records = load_records(getattr(args, "in"))
    kept, _ = apply_exclusions(records)
    story = args.story or (kept[0].story if kept else None)
    if story is None:
        raise DataError("no records after exclusions")
    data = aggregate(kept, story, args.nodes)
    fit = fit_edge_only(data, moment_order=args.order)
    out = {
        "n": fit.n,
        "moment_order": fit.moment_order,
        "lambdas": [float(x) for x in fit.lambdas],
        "probs": [float(x) for x in fit.probs],
        "loglik": fit.loglik,
        "converged": fit.converged,
        "empirical_moments": [float(x) for x in fit.empirical_moments],
        "fitted_moments": [float(x) for x in fit.fitted_moments],
    }
    if args.out:
        _write_json(args.out, out)
        _manifest(args, [args.out], started, inputs=[getattr(args, "in")])
    else:
        print(json.dumps(out, sort_keys=True))
    return 0


def cmd_exclusions(args) -> int:
    started = time.monotonic()
    records = load_records(getattr(args, "in"))
    kept, report = apply_exclusions(records)
    out = {
        "total": report.total,
        "kept": report.kept,
        "percent_excluded": round(100.0 * (report.total - report.kept) / report.total, 2)
        if report.total
        else 0.0,
        "rule_counts": dict(report.counts),
    }
    if args.out:
        _write_json(args.out, out)
        _manifest(args, [args.out], started, inputs=[getattr(args, "in")])
    else:
        print(json.dumps(out, sort_keys=True))
    return 0


def cmd_bench(args) -> int:
    started = time.monotonic()
    if args.nodes is not None:
        n = args.nodes
        n_obs = _n_obs_from_flags(args, n)
        records = args.records or 2048
        lengths = [length for length in (8, 16, 32, 64, 128) if records % length == 0]
        if not lengths:
            raise DataError(f"--records {records} is not a multiple of any tested length")
        scenarios = (
            BenchScenario(
                name="fixed-records",
                n=n,
                n_obs=n_obs,
                er_mix=(0.05, 0.95),
                uniform_floor=0.25,
                points=tuple((length, records) for length in lengths),
            ),
        )
    else:
        scenarios = default_scenarios()
    points = run_benchmark(scenarios, reps=args.reps, seed=args.seed, jobs=args.jobs)
    out_path = args.out or "bench.csv"
    write_csv(out_path, points)
    _manifest(args, [out_path], started)
    print(f"wrote {out_path}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ChainService, create_app

    service = ChainService(args.log_path, seed=args.seed)
    try:
        uvicorn.run(create_app(service), host=args.host, port=args.port, log_level="info")
    finally:
        service.close()
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphprior",
        description="Quantify priors over small graphs: simulate, fit, analyze, serve.",
    )
    parser.add_argument("--version", action="version", version=f"graphprior {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=fn)
        return p

    p = add("enumerate", cmd_enumerate, "count non-isomorphic graphs on --nodes")
    p.add_argument("--nodes", type=int, required=True)

    p = add("basis", cmd_basis, "list the subgraph basis for --order/--nodes")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--out")

    p = add("density", cmd_density, "exact injective density of motif in graph (JSON input)")
    p.add_argument("--in", required=True)

    p = add("fit", cmd_fit, "fit a max-entropy prior to a response log")
    p.add_argument("--in", required=True)
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--story")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = add("simulate", cmd_simulate, "simulate chains from a prior (default ER 0.5)")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--b", type=float, help="obscured fraction")
    p.add_argument("--shown", type=int, help="shown-relation count (alternative to --b)")
    p.add_argument("--records", type=int, default=256)
    p.add_argument("--chains", type=int)
    p.add_argument("--rounds", type=int, default=16)
    p.add_argument("--story")
    p.add_argument("--in", help="prior or model JSON; default ER(n, 0.5)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("mixing", cmd_mixing, "relaxation time of the chain for a prior")
    p.add_argument("--er", action="store_true", help="analytic Erdos-Renyi value")
    p.add_argument("--b", type=float)
    p.add_argument("--shown", type=int)
    p.add_argument("--in", help="prior or model JSON")

    p = add("cumulants", cmd_cumulants, "moments, cumulants, scaled cumulants of a prior")
    p.add_argument("--in", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--out")

    p = add("crossval", cmd_crossval, "held-out order selection on a response log")
    p.add_argument("--in", required=True)
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--order", required=True, help="comma-separated r values, e.g. 1,2,3")
    p.add_argument("--story")
    p.add_argument("--reps", type=int, default=64, help="splits")
    p.add_argument("--by-chain", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = add("genmatrix", cmd_genmatrix, "story-by-story generalization matrix")
    p.add_argument("--in", required=True)
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--reps", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = add("edgeonly", cmd_edgeonly, "edge-count max-entropy fit (any node count)")
    p.add_argument("--in", required=True)
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--order", type=int, default=6, help="moment order")
    p.add_argument("--story")
    p.add_argument("--out")

    p = add("exclusions", cmd_exclusions, "apply exclusion rules to a response log")
    p.add_argument("--in", required=True)
    p.add_argument("--out")

    p = add("bench-fit-vs-sample", cmd_bench, "fit vs frequency estimator benchmark")
    p.add_argument("--nodes", type=int, help="override: single fixed-records scenario")
    p.add_argument("--b", type=float)
    p.add_argument("--shown", type=int)
    p.add_argument("--records", type=int)
    p.add_argument("--reps", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")

    p = add("serve", cmd_serve, "run the live experiment HTTP service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--log-path", default="chain-service.jsonl")
    p.add_argument("--seed", type=int, default=0)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GraphPriorError, OSError, json.JSONDecodeError) as exc:
        json.dump(
            {"error": type(exc).__name__, "message": str(exc)},
            sys.stderr,
            sort_keys=True,
        )
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
