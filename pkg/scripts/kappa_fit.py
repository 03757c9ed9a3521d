"""Condition number of the CG-LU dual system and its fit to C p (1 + log p + r log 2)^2.

Prints the measured kappa grid, the single-constant least-squares fit over all
degrees, a separate fit per degree and the refinement ratios kappa(r+1)/kappa(r).
"""
import argparse

import numpy as np

from ietidp import IetiSystem, get_domain


def model(p, r):
    return p * (1.0 + np.log(p) + r * np.log(2.0)) ** 2


def fit(kappa, keys):
    k = np.array([kappa[key] for key in keys])
    m = np.array([model(*key) for key in keys])
    C = k @ m / (m @ m)
    return C, np.linalg.norm(k - C * m) / np.linalg.norm(k)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--domain", default="annulus32")
    ap.add_argument("--p", default="2,3,5")
    ap.add_argument("--r", default="3,4,5")
    args = ap.parse_args()
    ps = [int(s) for s in args.p.split(",")]
    rs = [int(s) for s in args.r.split(",")]
    mp = get_domain(args.domain)

    kappa = {}
    for p in ps:
        for r in rs:
            system = IetiSystem(mp, p, r, variant="cglu", share_factors=True)
            rep = system.solve(tol=1e-6).report
            kappa[(p, r)] = rep.cond_est
            print(f"p={p} r={r} dofs={system.n_dofs:>7} it={rep.iterations:>3} "
                  f"kappa={rep.cond_est:.3f}", flush=True)
            del system

    C, res = fit(kappa, list(kappa))
    print(f"\nall degrees: C = {C:.4f}, relative residual {res:.3f}")
    for p in ps:
        keys = [(p, r) for r in rs]
        Cp, rp = fit(kappa, keys)
        ratios = [kappa[(p, b)] / kappa[(p, a)] for a, b in zip(rs, rs[1:])]
        print(f"p={p}: C = {Cp:.4f}, residual {rp:.3f}, ratios "
              + " ".join(f"{x:.3f}" for x in ratios))


if __name__ == "__main__":
    main()
