"""How strongly the MINRES iteration count depends on the annulus decomposition.

Solves the same problem on quarter annuli split into different numbers of
radial and angular patches (32 patches each by default) with the fast
diagonalization and the CG-LU solver.
"""
import argparse

from ietidp import IetiSystem, quarter_annulus


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--p", type=int, default=5)
    ap.add_argument("--r", type=int, default=4)
    ap.add_argument("--layouts", default="4x8,8x4,2x16,16x2")
    args = ap.parse_args()
    for layout in args.layouts.split(","):
        nr, na = (int(s) for s in layout.split("x"))
        mp = quarter_annulus(nr, na)
        its = []
        for v in ("mfd", "cglu"):
            its.append(IetiSystem(mp, args.p, args.r, variant=v, share_factors=True)
                       .solve().report.iterations)
        print(f"{nr:>2} radial x {na:>2} angular: mfd {its[0]:>4}  cglu {its[1]:>3}", flush=True)


if __name__ == "__main__":
    main()
