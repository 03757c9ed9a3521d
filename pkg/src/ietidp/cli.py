"""``ieti`` command line: single runs, parameter sweeps and the verify suite.

Examples::

    ieti run --domain annulus32 --p 5 --r 6 --variant mfd --out run.csv
    ieti sweep --domain square4x4 --p 2,3 --r 2,3,4 --variants mfd,cglu --out sweep.csv
    ieti verify                      # default suite of small configurations
    ieti verify --domain square4x4 --p 2 --r 2

``run`` and ``sweep`` write one CSV row per configuration.  Failures inside a
solve (non-convergence, memory exhaustion) become the row's ``status`` and do
not change the exit code; only invalid configurations exit with 2.  ``verify``
exits with 1 when any check fails.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .assembly import h1_l2_error
from .checks import DEFAULT_SUITE, VERIFY_MAX_DOFS, verify
from .geometry import DOMAINS, classify_dofs, get_domain
from .ieti import (VARIANTS, InnerSolveError, IetiSystem, build_jumps, model_gradient,
                   model_solution)
from .krylov import STOP_RULES, NotSPDError

COLUMNS = ("domain", "p", "r", "variant", "dofs", "n_lambda", "n_pi", "it", "cond_est",
           "t_psi", "t_setup", "t_apply", "t_solve", "t_total", "l2_err", "h1_err", "status")
STATUSES = ("ok", "no-convergence", "oom", "error")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    domain: str
    p: int
    r: int
    variant: str = "mfd"
    tol: float = 1e-6
    psi_tol: float = 1e-8
    out: str | None = None
    repetitions: int = 1
    threads: int = 1
    stop: str = "l2"
    schur: str | None = None
    mlu_local: str = "augmented"
    share_factors: bool = False
    memory_budget_gib: float | None = None
    maxit: int = 5000

    def validate(self):
        if self.domain not in DOMAINS:
            raise ConfigError(f"unknown domain {self.domain!r}; choose from {', '.join(DOMAINS)}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.p < 1 or self.r < 0:
            raise ConfigError("need p >= 1 and r >= 0")
        for name in ("tol", "psi_tol"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        if self.repetitions < 1 or self.threads < 1 or self.maxit < 1:
            raise ConfigError("repetitions, threads and maxit must be positive")
        if self.stop not in STOP_RULES:
            raise ConfigError(f"stop must be one of {STOP_RULES}")
        if self.schur not in (None, "param", "phys"):
            raise ConfigError("schur must be 'param' or 'phys'")
        if self.mlu_local not in ("augmented", "projected"):
            raise ConfigError("mlu-local must be 'augmented' or 'projected'")
        return self


@dataclass
class BenchRecord:
    config: ExperimentConfig
    dofs: int = 0
    n_lambda: int = 0
    n_pi: int = 0
    it: int = 0
    cond_est: float = float("nan")
    t_psi: float = float("nan")
    t_setup: float = float("nan")
    t_apply: float = float("nan")
    t_solve: float = float("nan")
    t_total: float = float("nan")
    l2_err: float = float("nan")
    h1_err: float = float("nan")
    status: str = "ok"
    message: str = field(default="", repr=False)

    def row(self) -> dict:
        c = self.config

        def t(x):
            return "" if math.isnan(x) else f"{x:.3f}"

        def g(x):
            return "" if math.isnan(x) else f"{x:.6e}"

        return {
            "domain": c.domain, "p": c.p, "r": c.r, "variant": c.variant,
            "dofs": self.dofs, "n_lambda": self.n_lambda, "n_pi": self.n_pi, "it": self.it,
            "cond_est": g(self.cond_est),
            "t_psi": t(self.t_psi), "t_setup": t(self.t_setup), "t_apply": t(self.t_apply),
            "t_solve": t(self.t_solve), "t_total": t(self.t_total),
            "l2_err": g(self.l2_err), "h1_err": g(self.h1_err), "status": self.status,
        }


def count_dofs(domain: str, p: int, r: int):
    """``(dofs, n_lambda, n_pi)`` without assembling anything."""
    mp = get_domain(domain)
    cls = classify_dofs(mp, mp.spaces(p, r))
    n_lambda = build_jumps(mp, cls).n_lambda
    n_delta = sum(d.delta.size for d in cls.patches)
    return n_delta - n_lambda + cls.n_primal, n_lambda, cls.n_primal


def _has_exact_solution(domain: str) -> bool:
    # sin(pi x) sin(pi y) vanishes on the boundary of the unit square only
    return domain.startswith("square")


def run(config: ExperimentConfig) -> BenchRecord:
    """Assemble and solve one configuration; timings are minima over repetitions."""
    config.validate()
    rec = BenchRecord(config)
    try:
        rec.dofs, rec.n_lambda, rec.n_pi = count_dofs(config.domain, config.p, config.r)
    except Exception as exc:  # noqa: BLE001 - reported as a row status
        rec.status, rec.message = "error", f"{type(exc).__name__}: {exc}"
        return rec
    mp = get_domain(config.domain)
    budget = None if config.memory_budget_gib is None else config.memory_budget_gib * 2**30
    best = None
    try:
        for _ in range(config.repetitions):
            system = IetiSystem(mp, config.p, config.r, variant=config.variant,
                                psi_tol=config.psi_tol, schur=config.schur,
                                mlu_local=config.mlu_local, threads=config.threads,
                                stop=config.stop, share_factors=config.share_factors,
                                memory_budget=budget)
            sol = system.solve(tol=config.tol, maxit=config.maxit)
            tm = sol.timings
            times = (tm.psi, tm.setup, tm.apply, tm.solve, tm.total)
            best = times if best is None else tuple(map(min, best, times))
        rec.t_psi, rec.t_setup, rec.t_apply, rec.t_solve, rec.t_total = best
        rec.it = sol.report.iterations
        rec.cond_est = sol.report.cond_est
        rec.status = "ok" if sol.report.converged else "no-convergence"
        if _has_exact_solution(config.domain):
            rec.l2_err, rec.h1_err = h1_l2_error(mp, system.spaces, sol.coeffs,
                                                 model_solution, model_gradient)
    except MemoryError as exc:
        rec.status, rec.message = "oom", str(exc)
    except InnerSolveError as exc:
        rec.status, rec.message = "no-convergence", str(exc)
    except (NotSPDError, np.linalg.LinAlgError, ArithmeticError, ValueError, RuntimeError) as exc:
        rec.status, rec.message = "error", f"{type(exc).__name__}: {exc}"
    return rec


def write_csv(records, path=None, stream=None):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for rec in records:
        w.writerow(rec.row())
    text = buf.getvalue()
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    if stream is not None:
        stream.write(text)
    return text


def sweep(base: ExperimentConfig, p_list, r_list, variants, max_dofs: int | None = None,
          log=None):
    """Cartesian product of runs; configurations above ``max_dofs`` become ``oom`` rows."""
    records = []
    for p in p_list:
        for r in r_list:
            for v in variants:
                cfg = replace(base, p=p, r=r, variant=v).validate()
                if max_dofs is not None:
                    dofs, n_lambda, n_pi = count_dofs(cfg.domain, p, r)
                    if dofs > max_dofs:
                        rec = BenchRecord(cfg, dofs, n_lambda, n_pi, status="oom",
                                          message=f"{dofs} dofs above the budget {max_dofs}")
                        records.append(rec)
                        continue
                rec = run(cfg)
                records.append(rec)
                if log is not None:
                    print(f"# {cfg.domain} p={p} r={r} {v}: it={rec.it} status={rec.status}"
                          + (f" ({rec.message})" if rec.message else ""), file=log, flush=True)
    return records


def _int_list(text: str):
    if text.strip() == "":
        return []
    out = []
    for part in text.split(","):
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def _str_list(text: str):
    return [s for s in text.split(",") if s]


def _add_solver_args(ap):
    ap.add_argument("--domain", required=True)
    ap.add_argument("--tol", type=float, default=1e-6)
    ap.add_argument("--psi-tol", type=float, default=1e-8)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default=None, help="CSV file (default: stdout)")
    ap.add_argument("--repetitions", type=int, default=1)
    ap.add_argument("--stop", default="l2", choices=STOP_RULES,
                    help="MINRES stopping norm (default: true l2 residual)")
    ap.add_argument("--schur", default=None, choices=("param", "phys"))
    ap.add_argument("--mlu-local", default="augmented", choices=("augmented", "projected"))
    ap.add_argument("--share-factors", action="store_true",
                    help="reuse factorizations of numerically equal patch matrices")
    ap.add_argument("--memory-budget", type=float, default=None, metavar="GIB",
                    help="cap on sparse factor storage; exceeding it gives status oom")
    ap.add_argument("--maxit", type=int, default=5000)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ieti", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one configuration, one CSV row")
    _add_solver_args(p_run)
    p_run.add_argument("--p", type=int, required=True)
    p_run.add_argument("--r", type=int, required=True)
    p_run.add_argument("--variant", default="mfd")

    p_sw = sub.add_parser("sweep", help="Cartesian product of degrees, levels and variants")
    _add_solver_args(p_sw)
    p_sw.add_argument("--p", default="", help="comma list, ranges as a..b")
    p_sw.add_argument("--r", default="", help="comma list, ranges as a..b")
    p_sw.add_argument("--variants", default=",".join(VARIANTS))
    p_sw.add_argument("--max-dofs", type=int, default=None,
                      help="skip (status oom) configurations with more dofs")

    p_ver = sub.add_parser("verify", help="invariant and oracle checks on small problems")
    p_ver.add_argument("--domain", default=None, help="default: built-in suite")
    p_ver.add_argument("--p", type=int, default=2)
    p_ver.add_argument("--r", type=int, default=2)
    p_ver.add_argument("--quiet", action="store_true", help="print failures and summary only")
    return ap


def _config_from(args, p, r, variant) -> ExperimentConfig:
    return ExperimentConfig(
        domain=args.domain, p=p, r=r, variant=variant, tol=args.tol, psi_tol=args.psi_tol,
        out=args.out, repetitions=args.repetitions, threads=args.threads, stop=args.stop,
        schur=args.schur, mlu_local=args.mlu_local, share_factors=args.share_factors,
        memory_budget_gib=args.memory_budget, maxit=args.maxit)


def _cmd_verify(args) -> int:
    if args.domain is None:
        suite = DEFAULT_SUITE
    else:
        if args.domain not in DOMAINS:
            print(f"unknown domain {args.domain!r}", file=sys.stderr)
            return EXIT_CONFIG
        if args.p < 1 or args.r < 0:
            print("need p >= 1 and r >= 0", file=sys.stderr)
            return EXIT_CONFIG
        suite = ((args.domain, args.p, args.r),)
    t0 = time.perf_counter()
    failed = 0
    for domain, p, r in suite:
        dofs = count_dofs(domain, p, r)[0]
        if dofs > VERIFY_MAX_DOFS:
            print(f"{domain} p={p} r={r}: {dofs} dofs, verify is limited to "
                  f"{VERIFY_MAX_DOFS}", file=sys.stderr)
            return EXIT_CONFIG
        rep = verify(domain, p, r)
        print(f"== {domain} p={p} r={r} ({rep.seconds:.1f} s)")
        for c in rep.checks:
            if not (args.quiet and c.passed):
                print("   " + c.line())
        failed += sum(not c.passed for c in rep.checks)
    print(f"{'all checks passed' if failed == 0 else f'{failed} checks failed'} "
          f"in {time.perf_counter() - t0:.1f} s")
    return EXIT_OK if failed == 0 else EXIT_CHECK


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "verify":
        return _cmd_verify(args)
    try:
        if args.command == "run":
            cfg = _config_from(args, args.p, args.r, args.variant).validate()
            records = [run(cfg)]
        else:
            base = _config_from(args, 1, 0, VARIANTS[0]).validate()
            variants = _str_list(args.variants)
            bad = [v for v in variants if v not in VARIANTS]
            if bad:
                raise ConfigError(f"unknown variants {bad}")
            records = sweep(base, _int_list(args.p), _int_list(args.r), variants,
                            max_dofs=args.max_dofs, log=sys.stderr)
    except (ConfigError, ValueError) as exc:
        print(f"ieti: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for rec in records:
        if rec.message:
            print(f"# {rec.config.domain} p={rec.config.p} r={rec.config.r} "
                  f"{rec.config.variant}: {rec.status}: {rec.message}", file=sys.stderr)
    write_csv(records, path=args.out, stream=None if args.out else sys.stdout)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
