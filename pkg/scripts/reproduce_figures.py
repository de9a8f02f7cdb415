"""Re-run the simulation figures and write one tidy CSV per figure.

Every arm within a figure shares the master seed, so the scientists evolve
identically across arms and only the curation differs.

    python scripts/reproduce_figures.py --out results --reps 300
    python scripts/reproduce_figures.py --only connections journalist
"""

import argparse
import pathlib
import sys
import time

from epinet.agents import BiasedProduction, Journalist, NoCuration, SelectiveSharing
from epinet.cli import SWEEP_COLUMNS, summary_row, to_csv
from epinet.config import config_to_flat
from epinet.engine import SimConfig, run_batch


def connections():
    for k in (2, 6, 10, 14, 20):
        for cur in (NoCuration(), SelectiveSharing()):
            yield dict(K=20, network="cycle", n=10, epsilon=0.05, k=k, curation=cur)


def effect_size():
    for eps in (0.05, 0.1, 0.2):
        for cur in (NoCuration(), SelectiveSharing()):
            yield dict(K=20, network="cycle", n=10, epsilon=eps, k=10, curation=cur)


def study_size():
    for n in (1, 10, 100, 1000):
        for cur in (NoCuration(), SelectiveSharing()):
            yield dict(K=10, network="complete", n=n, epsilon=0.05, k=9, curation=cur)


def production_count():
    yield dict(K=10, network="complete", n=10, epsilon=0.05, k=5)
    for count in (1, 5, 10, 20):
        cur = BiasedProduction(10 * count, 10)
        yield dict(K=10, network="complete", n=10, epsilon=0.05, k=5, curation=cur)


def production_size():
    yield dict(K=10, network="complete", n=10, epsilon=0.05, k=10)
    for size in (1, 5, 10, 25, 50):
        cur = BiasedProduction(50, size)
        yield dict(K=10, network="complete", n=10, epsilon=0.05, k=10, curation=cur)


def budget_split():
    # 100 draws per round shared among K labs
    for K in (2, 5, 10, 20):
        for cur in (NoCuration(), SelectiveSharing()):
            yield dict(K=K, network="complete", n=100 // K, epsilon=0.05, k=K, curation=cur)


def journalist():
    for K in (6, 10, 20):
        for n in (5, 10, 20):
            for mode in ("fair", "random", "all"):
                yield dict(K=K, network="complete", n=n, epsilon=0.05, curation=Journalist(mode))


FIGURES = {
    f.__name__: f
    for f in (connections, effect_size, study_size, production_count,
              production_size, budget_split, journalist)
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results", help="output directory")
    ap.add_argument("--reps", type=int, default=300)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--only", nargs="*", choices=sorted(FIGURES), help="subset of figures")
    args = ap.parse_args(argv)

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.only or FIGURES:
        start, rows = time.time(), []
        for i, params in enumerate(FIGURES[name]()):
            cfg = SimConfig(reps=args.reps, seed=args.seed, **params)
            rows.append(summary_row(i, config_to_flat(cfg), run_batch(cfg, args.threads)))
        (out / f"{name}.csv").write_text(to_csv(SWEEP_COLUMNS, rows), newline="")
        print(f"{name}: {len(rows)} rows in {time.time() - start:.0f}s", file=sys.stderr)


if __name__ == "__main__":
    main()
