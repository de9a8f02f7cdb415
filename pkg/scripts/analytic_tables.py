"""Tables of the one-round analytic quantities.

Writes three CSVs: the spurious-result probability against n for a few
effect sizes, the exact E[x | x < n/2] with its least-squares line, and the
drift label over a (k, B_t) grid.
"""

import argparse
import pathlib

from epinet import analytic as an
from epinet.cli import ANALYTIC_COLUMNS, analytic_row, to_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--n-max", type=int, default=200)
    args = ap.parse_args(argv)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rows = [
        {"n": n, "epsilon": eps, "p_spurious": an.p_spurious(n, eps)}
        for eps in (0.001, 0.01, 0.05, 0.2)
        for n in range(1, args.n_max + 1)
    ]
    (out / "p_spurious.csv").write_text(to_csv(("n", "epsilon", "p_spurious"), rows), newline="")

    intercept, slope = an.fit_spurious_expectation(range(20, args.n_max + 1), 0.05)
    rows = [
        {"n": n, "E_tilde": an.spurious_expectation(n, 0.05), "fit": intercept + slope * n}
        for n in range(1, args.n_max + 1)
    ]
    (out / "spurious_expectation.csv").write_text(to_csv(("n", "E_tilde", "fit"), rows), newline="")

    rows = [
        analytic_row(an.AnalyticParams(n=10, epsilon=0.05, K=20, k=k, r=1.0, B_t=b / 20))
        for k in range(0, 21, 2)
        for b in range(1, 20)
    ]
    (out / "drift_grid.csv").write_text(to_csv(ANALYTIC_COLUMNS, rows), newline="")


if __name__ == "__main__":
    main()
