"""Iteration counts and timings of all three solvers on the quarter annulus.

Each configuration runs in its own ``ieti run`` process so that the sparse
factors of one run are released before the next starts.  Results are appended
to a CSV file and summarized as a table on stdout.

    python scripts/annulus_table.py --p 5 --r 4..7 --out annulus_p5.csv
    python scripts/annulus_table.py --p 8 --r 6 --variants mfd,cglu
"""
import argparse
import csv
import io
import subprocess
import sys

REFERENCE = {  # reference iteration counts, (p, r) -> variant -> it
    (5, 6): {"mfd": 71, "cglu": 15, "mlu": 37},
    (5, 7): {"mfd": 80, "cglu": 15, "mlu": 39},
    (8, 6): {"mfd": 76, "cglu": 15},
}


def int_list(text):
    out = []
    for part in text.split(","):
        a, _, b = part.partition("..")
        out.extend(range(int(a), int(b or a) + 1))
    return out


def run_one(p, r, variant, tol, domain):
    cmd = [sys.executable, "-m", "ietidp.cli", "run", "--domain", domain, "--p", str(p),
           "--r", str(r), "--variant", variant, "--tol", str(tol), "--share-factors"]
    out = subprocess.run(cmd, capture_output=True, text=True)
    if out.returncode != 0:
        sys.stderr.write(out.stderr)
        return None
    return next(csv.DictReader(io.StringIO(out.stdout)))


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--p", default="5")
    ap.add_argument("--r", default="4..6")
    ap.add_argument("--variants", default="mfd,mlu,cglu")
    ap.add_argument("--domain", default="annulus32")
    ap.add_argument("--tol", type=float, default=1e-6)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    rows = []
    print(f"{'p':>2} {'r':>2} {'variant':>7} {'dofs':>8} {'it':>4} {'ref':>4} "
          f"{'apply/it':>9} {'t_total':>8} status")
    for p in int_list(args.p):
        for r in int_list(args.r):
            for v in args.variants.split(","):
                row = run_one(p, r, v, args.tol, args.domain)
                if row is None:
                    continue
                rows.append(row)
                ref = REFERENCE.get((p, r), {}).get(v, "")
                it = int(row["it"])
                per = float(row["t_apply"]) / it if row["t_apply"] and it else float("nan")
                print(f"{p:>2} {r:>2} {v:>7} {row['dofs']:>8} {it:>4} {ref:>4} "
                      f"{per:9.4f} {row['t_total']:>8} {row['status']}", flush=True)
    if args.out and rows:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
