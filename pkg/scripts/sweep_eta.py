"""Systolic ratio along the eta family for several Euler numbers.

Writes one CSV with columns e, eta, a, systole, volume, ratio, gap, where
gap = 1/2 - ratio.  Prints the table as it goes.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from systolica.cli import sweep_eta


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--e", type=int, nargs="+", default=[3, 4, 5, 10])
    ap.add_argument("--points", type=int, default=12, help="eta values per e, log-spaced")
    ap.add_argument("--out", type=Path, default=Path("results/sweep_eta.csv"))
    args = ap.parse_args()

    args.out.parent.mkdir(parents=True, exist_ok=True)
    with args.out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["e", "eta", "a", "systole", "volume", "ratio", "gap"])
        for e in args.e:
            # eta runs over (0, 1/(2+e)) from its upper end toward 0
            etas = np.geomspace(0.9 / (2 + e), 1e-4 / e, args.points)
            for row in sweep_eta(e, [float(x) for x in etas]):
                gap = 0.5 - row["ratio"]
                w.writerow([e, row["eta"], row["a"], row["systole"], row["volume"], row["ratio"], gap])
                print(f"e={e:3d} eta={row['eta']:.3e} ratio={row['ratio']:.8f} gap={gap:.3e}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
