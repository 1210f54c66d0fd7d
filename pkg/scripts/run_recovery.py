#!/usr/bin/env python3
"""Prior-recovery error versus response budget.

For each budget, repeatedly synthesize ideal-agent data from a fixed truth,
fit by exact Newton, and report the mean KL from truth to fit.  Should fall
roughly like 1/records.
"""

import argparse
import json
import pathlib
import sys
import time

import numpy as np

from graphprior import __version__
from graphprior.cli import RunManifest
from graphprior.ergm import (
    ErgmModel,
    ResponseDataset,
    ResponseItem,
    fit_newton,
    posterior_sample,
    prior_table,
)
from graphprior.graphs import PartialGraph, pair_count
from graphprior.mcmcp import kl_divergence, sample_prior_class


def synth(model, records, rng, n_obs):
    m = pair_count(model.n)
    table = prior_table(model)
    items = []
    for t in range(records):
        g = sample_prior_class(table, rng)
        slots = [int(x) for x in rng.choice(m, size=n_obs, replace=False)]
        pg = PartialGraph.obscure(g, slots)
        items.append(ResponseItem(pg, posterior_sample(model, pg, rng), chain_id=t))
    return ResponseDataset(model.n, tuple(items))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--budgets", default="128,512,2048")
    ap.add_argument("--reps", type=int, default=64)
    ap.add_argument("--order", type=int, default=2)
    ap.add_argument("--n-obs", type=int, default=5)
    ap.add_argument("--seed", type=int, default=99)
    ap.add_argument("--out", default="results/recovery.json")
    args = ap.parse_args(argv)
    started = time.monotonic()

    truth = ErgmModel.with_order(5, 2, np.array([0.5, -2.0, 2.5]))
    truth_table = prior_table(truth)
    budgets = [int(x) for x in args.budgets.split(",")]

    rows = []
    print(f"{'records':>8} {'mean KL':>10} {'sd':>10}")
    for records in budgets:
        kls = []
        for rep in range(args.reps):
            rng = np.random.default_rng(np.random.SeedSequence((args.seed, records, rep)))
            data = synth(truth, records, rng, args.n_obs)
            fit = fit_newton(data, args.order)
            kls.append(kl_divergence(truth_table, prior_table(fit.model)))
        rows.append({"records": records, "kl_mean": float(np.mean(kls)), "kl_sd": float(np.std(kls))})
        print(f"{records:>8} {rows[-1]['kl_mean']:>10.5f} {rows[-1]['kl_sd']:>10.5f}")

    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({"rows": rows}, indent=2) + "\n")
    RunManifest(
        command="run_recovery",
        config=vars(args),
        seed=args.seed,
        inputs=[],
        outputs=[str(out)],
        version=__version__,
        wall_time_seconds=round(time.monotonic() - started, 3),
    ).write(out)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
