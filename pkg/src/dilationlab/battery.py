"""The equivalence battery: several independent routes to the same verdict.

Columns
-------
``complete_dissipativity``
    PSD test of every dissipation operator of the generators.
``pk_scan``
    PSD test of ``p_K(T_1(t_1), ..., T_d(t_d))`` on a t-grid.
``approximants``
    complete dissipativity of the Hille and Yosida approximant families for
    every rate on the lambda grid; FAIL if any rate fails.
``polynomial_bounds``
    ``|p(T(t))| <= sup_T^d |p|`` over a polynomial corpus (certified sup).
``gram``
    Gram-kernel positivity over a point-set schedule.

The first three are decision procedures for bounded generators and must
agree.  The last two certify failure when they fail and are evidence only
when they pass.
"""
import functools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .approximants import HILLE, YOSIDA, ApproximantKind, approximant_family
from .calculus import default_gram_schedule, gram_scan
from .config import DEFAULTS, Tolerances
from .poly import (
    LaurentPolynomial,
    TorusSup,
    all_subsets,
    complete_dissipativity_report,
    default_t_grid,
    p_K_polynomial,
    pK_positivity_scan,
    regular_polynomial_bound_check,
    torus_sup,
)
from .semigroup import CommutingFamily

DECISIVE = ("complete_dissipativity", "pk_scan", "approximants")
EVIDENCE = ("polynomial_bounds", "gram")
COLUMNS = DECISIVE + EVIDENCE


@dataclass
class BatteryConfig:
    columns: tuple = COLUMNS
    lambda_grid: tuple = (2.0, 8.0, 32.0)
    variants: tuple = (HILLE, YOSIDA)
    t_grid: Optional[list] = None            # default: geometric grid near 0
    grid_max: int = 10_000
    bound_grid_max: int = 512
    gram_exponents: tuple = tuple(range(0, 9))
    extra_polynomials: tuple = ()
    tolerances: Tolerances = DEFAULTS
    threads: int = 1


@dataclass
class BatteryResult:
    verdicts: dict                           # column -> "PASS" / "FAIL"
    witnesses: dict                          # column -> witness dict (FAIL) or summary
    timings: dict = field(default_factory=dict)

    @property
    def agreement(self) -> bool:
        decisive = [self.verdicts[c] for c in DECISIVE if c in self.verdicts]
        return len(set(decisive)) <= 1

    @property
    def overall(self) -> str:
        """PASS only when every column passes; FAIL when all decisive columns fail."""
        if all(v == "PASS" for v in self.verdicts.values()):
            return "PASS"
        return "FAIL"

    @property
    def consistent(self) -> bool:
        """Decisive columns agree and no evidence column fails on a PASS row."""
        if not self.agreement:
            return False
        decisive = {self.verdicts[c] for c in DECISIVE if c in self.verdicts}
        if decisive == {"PASS"}:
            return all(self.verdicts.get(c, "PASS") == "PASS" for c in EVIDENCE)
        return True

    def as_dict(self) -> dict:
        return {"verdicts": self.verdicts, "agreement": self.agreement, "consistent": self.consistent,
                "witnesses": self.witnesses}


def _verdict(flag: bool) -> str:
    return "PASS" if flag else "FAIL"


def _key(K) -> str:
    return "{" + ",".join(str(k + 1) for k in K) + "}"


def _dissipativity_column(fam, tol):
    rep = complete_dissipativity_report(fam, tol)
    K, v = rep.worst
    witness = {"min_eigenvalues": {_key(K): v.min_eigenvalue for K, v in rep.verdicts.items()},
               "worst_K": _key(K), "worst_min_eigenvalue": v.min_eigenvalue}
    if not rep.passed:
        witness["failing_K"] = [_key(K) for K in rep.failing()]
    return rep.passed, witness


def _pk_column(fam, t_grid, tol):
    rep = pK_positivity_scan(fam, t_grid, tol)
    (K, t), v = rep.worst
    witness = {"grid_points": len({t for _, t in rep.verdicts}), "worst_K": _key(K), "worst_t": list(t),
               "worst_min_eigenvalue": v.min_eigenvalue}
    if not rep.passed:
        failing = rep.failing()
        witness["failures"] = len(failing)
        # smallest t (in sup norm) at which some p_K fails: failure reaches down to 0
        K0, t0 = min(failing, key=lambda kt: (max(kt[1]), kt[1]))
        witness["smallest_failing_t"] = list(t0)
        witness["smallest_failing_K"] = _key(K0)
    return rep.passed, witness, rep


def _approximant_column(fam, lambda_grid, variants, tol):
    rows, ok = [], True
    for variant in variants:
        for lam in lambda_grid:
            afam = approximant_family(fam, [ApproximantKind(variant, lam)] * fam.d)
            rep = complete_dissipativity_report(afam, tol)
            K, v = rep.worst
            rows.append({"variant": variant, "lambda": lam, "passed": rep.passed, "worst_K": _key(K),
                         "worst_min_eigenvalue": v.min_eigenvalue})
            ok &= rep.passed
    witness = {"rows": rows}
    if not ok:
        witness["failing"] = [r for r in rows if not r["passed"]]
    return ok, witness


@functools.lru_cache(maxsize=256)
def _cached_sup(key):
    d, terms = key
    return torus_sup(LaurentPolynomial(d, dict(terms)))


def cached_torus_sup(p: LaurentPolynomial) -> TorusSup:
    """Torus sups depend only on the polynomial, so one computation serves every family.

    Variables that do not occur in ``p`` are dropped first: the sup over the
    smaller torus is the same number and much cheaper to certify.
    """
    active = [i for i in range(p.d) if any(n[i] for n in p.terms)]
    if not active:
        c = abs(next(iter(p.terms.values()), 0.0))
        return TorusSup(c, c, np.zeros(p.d), 1)
    reduced = tuple(sorted((tuple(n[i] for i in active), c) for n, c in p.terms.items()))
    sup = _cached_sup((len(active), reduced))
    argmax = np.zeros(p.d)
    argmax[active] = sup.argmax
    return TorusSup(sup.sup_estimate, sup.upper_bound, argmax, sup.cells)


def polynomial_corpus(d: int, extra: Sequence[LaurentPolynomial] = ()) -> list:
    """``(name, p)`` pairs: monomials of degree <= 1, ``p_K`` and the shifted ``p_K - 4^|K|/2``.

    The shifted polynomials turn a negative eigenvalue of ``p_K(T)`` into a
    norm excess: on the torus ``|p_K - c| <= c`` with ``c = 4^|K|/2``.
    """
    corpus = [("1", LaurentPolynomial.constant(d))]
    for i in range(d):
        corpus.append((f"X{i + 1}", LaurentPolynomial.variable(d, i)))
        corpus.append((f"X{i + 1}^-1", LaurentPolynomial.variable(d, i, -1)))
    for i in range(d):
        for j in range(i + 1, d):
            corpus.append((f"X{i + 1}^-1 X{j + 1}", LaurentPolynomial.monomial(
                [(-1 if k == i else 1 if k == j else 0) for k in range(d)])))
    for K in all_subsets(d):
        if not K:
            continue
        pK = p_K_polynomial(K, d)
        corpus.append((f"p_{_key(K)}", pK))
        corpus.append((f"p_{_key(K)} - {4 ** len(K) // 2}", pK - 4 ** len(K) / 2))
    corpus.extend((f"extra{n}", p) for n, p in enumerate(extra))
    return corpus


def _bounds_column(fam, t_grid, extra, tol):
    corpus = polynomial_corpus(fam.d, extra)
    checked, worst, failure = 0, None, None
    for name, p in corpus:
        sup = cached_torus_sup(p)
        for t in t_grid:
            chk = regular_polynomial_bound_check(fam, t, p, tol=tol, sup=sup)
            checked += 1
            row = {"polynomial": name, "t": list(chk.t), "norm": chk.norm,
                   "sup_upper_bound": chk.upper_bound, "excess": chk.norm - chk.upper_bound}
            if worst is None or row["excess"] > worst["excess"]:
                worst = row
            if not chk.passed and failure is None:
                failure = row
    witness = {"checks": checked, "polynomials": len(corpus), "worst": worst}
    if failure is not None:
        witness["failure"] = failure
    return failure is None, witness


def _gram_column(fam, exponents, tol):
    results = gram_scan(fam, default_gram_schedule(fam.d, exponents=exponents), tol)
    worst = min(results, key=lambda r: r.verdict.min_eigenvalue)
    ok = all(r.passed for r in results)
    witness = {"point_sets": len(results), "worst_min_eigenvalue": worst.verdict.min_eigenvalue,
               "worst_points": [list(map(float, p)) for p in worst.points]}
    if not ok:
        bad = [r for r in results if not r.passed]
        first = min(bad, key=lambda r: r.verdict.min_eigenvalue)
        witness["failure"] = first.as_dict()
        witness["failing_sets"] = len(bad)
    return ok, witness


def run_equivalence_battery(fam: CommutingFamily, config: BatteryConfig = None) -> BatteryResult:
    """Run the selected columns on ``fam``; columns are independent and may run in threads."""
    cfg = config or BatteryConfig()
    tol = cfg.tolerances.psd_tol
    t_grid = cfg.t_grid if cfg.t_grid is not None else default_t_grid(fam.d, max_points=cfg.grid_max)
    scan_holder = {}

    def run(column):
        start = time.perf_counter()
        if column == "complete_dissipativity":
            out = _dissipativity_column(fam, tol)
        elif column == "pk_scan":
            ok, wit, rep = _pk_column(fam, t_grid, tol)
            scan_holder["rep"] = rep
            out = ok, wit
        elif column == "approximants":
            out = _approximant_column(fam, cfg.lambda_grid, cfg.variants, tol)
        elif column == "polynomial_bounds":
            out = None      # needs the scan witnesses; run afterwards
        elif column == "gram":
            out = _gram_column(fam, cfg.gram_exponents, tol)
        else:
            raise ValueError(f"unknown column {column!r}")
        return column, out, time.perf_counter() - start

    first = [c for c in cfg.columns if c != "polynomial_bounds"]
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            results = list(pool.map(run, first))
    else:
        results = [run(c) for c in first]
    verdicts, witnesses, timings = {}, {}, {}
    for column, (ok, wit), dt in results:
        verdicts[column], witnesses[column], timings[column] = _verdict(ok), wit, dt
    if "polynomial_bounds" in cfg.columns:
        start = time.perf_counter()
        bound_grid = default_t_grid(fam.d, max_points=cfg.bound_grid_max)
        rep = scan_holder.get("rep")
        if rep is not None and not rep.passed:
            # probe the bound corpus where p_K positivity failed most
            (_, t_worst), _ = rep.worst
            extra_t = sorted({t for _, t in rep.failing()}, key=lambda t: _min_eig_at(rep, t))[:8]
            bound_grid = list(dict.fromkeys(list(bound_grid) + [t_worst] + extra_t))
        ok, wit = _bounds_column(fam, bound_grid, cfg.extra_polynomials, tol)
        verdicts["polynomial_bounds"], witnesses["polynomial_bounds"] = _verdict(ok), wit
        timings["polynomial_bounds"] = time.perf_counter() - start
    ordered = [c for c in COLUMNS if c in verdicts]
    return BatteryResult({c: verdicts[c] for c in ordered}, {c: witnesses[c] for c in ordered}, timings)


def _min_eig_at(rep, t) -> float:
    return min(v.min_eigenvalue for (K, s), v in rep.verdicts.items() if s == t)


def subset_battery(fam: CommutingFamily, config: BatteryConfig = None) -> dict:
    """Battery on every non-empty subfamily; keys are 1-based subset labels."""
    out = {}
    for C in all_subsets(fam.d):
        if C:
            out[_key(C)] = run_equivalence_battery(fam.subfamily(C), config)
    return out
