"""Command line entry point: ``dilationlab <command> [options]``.

Commands: ``analyze``, ``approximants``, ``stochastic``, ``counterexample``,
``monoid``.  Every command writes a JSON report (stdout unless ``--out``) and
optional CSV tables (``--csv-dir``).

Exit codes: 0 all selected checks PASS, 1 at least one FAIL, 2 usage or
validation error.

Shared options may also be set through ``DILATIONLAB_<NAME>`` environment
variables (``DILATIONLAB_SEED``, ``DILATIONLAB_MC_N``, ``DILATIONLAB_TOL_PSD``,
...).  Precedence: command line, then environment, then spec file, then
built-in defaults.
"""
import argparse
import csv
import json
import math
import os
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import __version__
from .approximants import (
    HILLE,
    YOSIDA,
    ApproximantKind,
    convergence_profile,
    expectation_identity_check,
    is_contractive_on_grid,
    profile_is_decreasing,
)
from .battery import BatteryConfig, _key, polynomial_corpus, run_equivalence_battery
from .families import alpha_interval, random_dissipative, spectrum_deviation
from .monoid import (
    AXIOMS,
    CcrFamily,
    CorrelatedHeisenberg,
    Euclidean,
    GroupElement,
    Heisenberg,
    PositivityStructure,
    Product,
    axioms_check,
    ccr_relation_check,
    heisenberg_homomorphism,
    mutated_structure,
)
from .poly import all_subsets, complete_dissipativity_report, default_t_grid, transfer_check
from .semigroup import CommutingFamily, NonCommutingError
from .spec_io import FamilySpec, SpecError, build_family, counterexample_spec, load_spec, spec_from_dict
from .stochastic import characteristic_fn, empirical_char_fn, law_from_name, moments, sample, semigroup_law_check

ENV_PREFIX = "DILATIONLAB_"
SHARED = {  # dest -> (flag, type)
    "spec": ("--spec", str),
    "out": ("--out", str),
    "seed": ("--seed", int),
    "mc_n": ("--mc-n", int),
    "tol_psd": ("--tol-psd", float),
    "grid_max": ("--grid-max", float),
    "threads": ("--threads", int),
}


class UsageError(Exception):
    pass


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return __version__


# -- JSON / CSV output -------------------------------------------------------------

def _plain(obj):
    """Recursively convert numpy scalars, arrays, complex and tuples to JSON types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_plain(float(obj.real)), _plain(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def dump_report(report: dict) -> str:
    return json.dumps(_plain(report), indent=2, sort_keys=True) + "\n"


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_csv_cell(r[h]) for h in header])


def _csv_cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


# -- shared option handling --------------------------------------------------------

def _env_value(dest):
    flag, typ = SHARED[dest]
    name = ENV_PREFIX + dest.upper()
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return None
    try:
        return typ(raw)
    except ValueError:
        raise UsageError(f"{name}={raw!r} is not a valid {typ.__name__}") from None


def resolve_shared(args) -> dict:
    out = {}
    for dest in SHARED:
        v = getattr(args, dest, None)
        out[dest] = v if v is not None else _env_value(dest)
    for dest in ("seed", "mc_n"):
        if out[dest] is not None and out[dest] < 0:
            raise UsageError(f"--{dest.replace('_', '-')} must be non-negative")
    if out["threads"] is not None and out["threads"] < 1:
        raise UsageError("--threads must be >= 1")
    if out["grid_max"] is not None and out["grid_max"] < 1:
        raise UsageError("--grid-max must be >= 1")
    if out["tol_psd"] is not None and not out["tol_psd"] > 0:
        raise UsageError("--tol-psd must be positive")
    return out


def apply_overrides(spec: FamilySpec, shared: dict) -> FamilySpec:
    """Command-line and environment values take precedence over the spec file."""
    if shared["tol_psd"] is not None:
        spec.tolerances = spec.tolerances.with_overrides(psd_tol=shared["tol_psd"])
    if shared["grid_max"] is not None:
        spec.grids["grid_max"] = int(shared["grid_max"])
    if shared["seed"] is not None:
        spec.mc["seed"] = shared["seed"]
    if shared["mc_n"] is not None:
        spec.mc["n"] = shared["mc_n"]
    return spec


def _report(command, verdicts, witnesses, timings, seeds, tolerances, spec_digest=None, extra=None) -> dict:
    rep = {"command": command, "spec_digest": spec_digest, "verdicts": verdicts, "witnesses": witnesses,
           "timings": timings, "seeds": seeds, "tool_version": tool_version(),
           "tolerances": tolerances}
    if extra:
        rep.update(extra)
    return rep


def _exit_code(verdicts: dict) -> int:
    return 0 if all(v == "PASS" for v in verdicts.values()) else 1


def _verdict(flag) -> str:
    return "PASS" if flag else "FAIL"


# -- analyze -----------------------------------------------------------------------

def _ccr_checks(fam: CcrFamily, seed: int, pairs: int = 100, max_time: int = 4):
    rel = 0.0
    for i in range(fam.d):
        for j in range(fam.d):
            for s in range(max_time + 1):
                for t in range(max_time + 1):
                    rel = max(rel, ccr_relation_check(fam, s, t, i, j))
    rng = np.random.default_rng(seed)
    G = fam.group()
    hom, worst_pair = 0.0, None
    for _ in range(pairs):
        g1 = GroupElement(G, np.r_[rng.integers(0, 3, fam.d), rng.uniform(-2, 2)])
        g2 = GroupElement(G, np.r_[rng.integers(0, 3, fam.d), rng.uniform(-2, 2)])
        r = heisenberg_homomorphism(fam, g1, g2)
        if worst_pair is None or r > hom:
            hom, worst_pair = r, (g1.coords.tolist(), g2.coords.tolist())
    verdicts = {"ccr_relation": _verdict(rel <= 1e-12), "ccr_homomorphism": _verdict(hom <= 1e-10)}
    witnesses = {"ccr_relation": {"max_residual": rel, "max_time": max_time, "C": fam.C},
                 "ccr_homomorphism": {"max_residual": hom, "pairs": pairs, "worst_pair": worst_pair}}
    return verdicts, witnesses


def _convergence_rows(fam: CommutingFamily, lambda_grid):
    t_grid = np.linspace(0.0, 10.0, 21)
    rows = []
    for i, g in enumerate(fam.generators):
        for variant in (HILLE, YOSIDA):
            for r in convergence_profile(g, variant, lambda_grid, t_grid):
                rows.append({"member": i + 1, "variant": variant, **r})
    return rows


def _mc_rows(fam: CommutingFamily, lambda_grid, n, seed, times=(0.5, 2.0)):
    rows = []
    for i, g in enumerate(fam.generators):
        for variant in (HILLE, YOSIDA):
            for lam in lambda_grid:
                for t in times:
                    dev, err = expectation_identity_check(g, ApproximantKind(variant, lam), t, n, seed)
                    rows.append({"member": i + 1, "variant": variant, "lambda": float(lam), "t": float(t),
                                 "deviation": dev, "mc_error": err})
    return rows


def _decreasing_by_series(rows) -> dict:
    series = {}
    for r in rows:
        series.setdefault((r["member"], r["variant"]), []).append(r)
    return {f"{m}/{v}": profile_is_decreasing(s) for (m, v), s in series.items()}


def cmd_analyze(args, shared) -> tuple:
    if not shared["spec"]:
        raise UsageError("analyze needs --spec PATH")
    spec = apply_overrides(load_spec(shared["spec"]), shared)
    threads = shared["threads"] or 1
    timings, verdicts, witnesses, tables = {}, {}, {}, {}
    start = time.perf_counter()
    fam = build_family(spec)
    timings["build"] = time.perf_counter() - start
    seeds = {"mc_seed": spec.mc["seed"], "family_seed": spec.family.get("seed")}
    if isinstance(fam, CcrFamily):
        start = time.perf_counter()
        verdicts, witnesses = _ccr_checks(fam, spec.mc["seed"])
        timings["ccr"] = time.perf_counter() - start
        return _report("analyze", verdicts, witnesses, timings, seeds, spec.tolerances.as_dict(),
                       spec.digest()), tables

    cfg = BatteryConfig(columns=spec.enabled_columns(), lambda_grid=tuple(spec.grids["lambda_grid"]),
                        t_grid=[tuple(t) for t in spec.grids["t_grid"]] if spec.grids["t_grid"] else None,
                        grid_max=spec.grids["grid_max"], gram_exponents=tuple(spec.grids["gram_exponents"]),
                        extra_polynomials=tuple(spec.polynomials), tolerances=spec.tolerances, threads=threads)
    if cfg.columns:
        res = run_equivalence_battery(fam, cfg)
        verdicts.update(res.verdicts)
        witnesses.update(res.witnesses)
        timings.update(res.timings)
        verdicts["column_agreement"] = _verdict(res.consistent)
        witnesses["column_agreement"] = {"decisive_agree": res.agreement, "consistent": res.consistent}
        tables["battery"] = (["column", "verdict"], [{"column": c, "verdict": v} for c, v in res.verdicts.items()])
        if "complete_dissipativity" in res.witnesses:
            mins = res.witnesses["complete_dissipativity"]["min_eigenvalues"]
            tables["dissipation"] = (["K", "min_eigenvalue"], [{"K": k, "min_eigenvalue": v} for k, v in mins.items()])

    if spec.batteries.get("subsets"):
        start = time.perf_counter()
        sub_cfg = BatteryConfig(**{**cfg.__dict__, "threads": 1})
        rows, ok = {}, True
        for C in all_subsets(fam.d):
            if not C or len(C) == fam.d:
                continue
            r = run_equivalence_battery(fam.subfamily(C), sub_cfg)
            rows[_key(C)] = r.verdicts
            ok &= r.overall == "PASS"
        verdicts["proper_subsets"] = _verdict(ok)
        witnesses["proper_subsets"] = {"rows": rows}
        if not ok:
            witnesses["proper_subsets"]["failing"] = [k for k, v in rows.items()
                                                       if any(x == "FAIL" for x in v.values())]
        timings["proper_subsets"] = time.perf_counter() - start

    if spec.batteries.get("transfer"):
        start = time.perf_counter()
        grid = default_t_grid(fam.d, max_points=min(spec.grids["grid_max"], 64))
        rows, ok = [], True
        disp = complete_dissipativity_report(fam, spec.tolerances.psd_tol)
        lam = spec.grids["lambda_grid"][0]
        for name, p in polynomial_corpus(fam.d, spec.polynomials) if disp.passed else []:
            if p.absolute_degree > 1 or not p.is_self_adjoint():
                continue
            for variant in (HILLE, YOSIDA):
                rep = transfer_check(fam, [ApproximantKind(variant, lam)] * fam.d, p, grid, n=spec.mc["n"],
                                     tol=1e-8, seed=spec.mc["seed"], mc_grid=grid[-2:])
                ok &= rep.passed
                rows.append({"polynomial": name, "variant": variant, "lambda": lam,
                             "source_psd": rep.source_psd, "approximant_psd": rep.approximant_psd,
                             "worst_approximant_eig": rep.worst_approximant_eig, "mc_rows": rep.mc_rows,
                             "passed": rep.passed})
        verdicts["transfer"] = _verdict(ok)
        witnesses["transfer"] = {"rows": rows, "skipped": [] if disp.passed else ["family not dissipative"]}
        timings["transfer"] = time.perf_counter() - start

    if spec.batteries.get("convergence"):
        start = time.perf_counter()
        rows = _convergence_rows(fam, [1.0, 4.0, 16.0, 64.0, 256.0])
        dec = _decreasing_by_series(rows)
        verdicts["convergence"] = _verdict(all(dec.values()))
        witnesses["convergence"] = {"decreasing": dec}
        if not all(dec.values()):
            witnesses["convergence"]["failing"] = [k for k, v in dec.items() if not v]
        tables["convergence"] = (["member", "variant", "lambda", "sup_error"], rows)
        timings["convergence"] = time.perf_counter() - start

    if spec.batteries.get("mc_identities"):
        start = time.perf_counter()
        rows = _mc_rows(fam, spec.grids["lambda_grid"], spec.mc["n"], spec.mc["seed"])
        sig = spec.tolerances.mc_sigmas
        bad = [r for r in rows if r["deviation"] > sig * r["mc_error"] + 1e-12]
        verdicts["mc_identities"] = _verdict(not bad)
        witnesses["mc_identities"] = {"rows": len(rows), "sigmas": sig}
        if bad:
            witnesses["mc_identities"]["failing"] = bad
        tables["mc"] = (["member", "variant", "lambda", "t", "deviation", "mc_error"], rows)
        timings["mc_identities"] = time.perf_counter() - start

    if not verdicts:
        raise UsageError("the spec enables no checks")
    return _report("analyze", verdicts, witnesses, timings, seeds, spec.tolerances.as_dict(), spec.digest()), tables


# -- approximants ------------------------------------------------------------------

def cmd_approximants(args, shared) -> tuple:
    seed = shared["seed"] if shared["seed"] is not None else 0
    n = shared["mc_n"] if shared["mc_n"] is not None else 100_000
    digest = None
    if shared["spec"]:
        spec = apply_overrides(load_spec(shared["spec"]), shared)
        fam = build_family(spec)
        if isinstance(fam, CcrFamily):
            raise UsageError("approximants needs a matrix family, not a ccr recipe")
        seed, n, digest = spec.mc["seed"], spec.mc["n"], spec.digest()
    else:
        fam = CommutingFamily.from_matrices([random_dissipative(args.dim, np.random.default_rng(seed))])
    lambdas = args.lambdas
    timings = {}
    start = time.perf_counter()
    conv = _convergence_rows(fam, lambdas)
    timings["convergence"] = time.perf_counter() - start
    dec = _decreasing_by_series(conv)
    t_grid = np.linspace(0.0, 10.0, 21)
    contractive = {f"{i + 1}/{v}/{lam:g}": is_contractive_on_grid(g, ApproximantKind(v, lam), t_grid)
                   for i, g in enumerate(fam.generators) for v in (HILLE, YOSIDA) for lam in lambdas}
    verdicts = {"convergence_decreasing": _verdict(all(dec.values())),
                "contractive": _verdict(all(contractive.values()))}
    witnesses = {"convergence_decreasing": {"series": dec},
                 "contractive": {"failing": [k for k, v in contractive.items() if not v]}}
    tables = {"convergence": (["member", "variant", "lambda", "sup_error"], conv)}
    if n > 0:
        start = time.perf_counter()
        mc = _mc_rows(fam, lambdas, n, seed)
        timings["mc_identities"] = time.perf_counter() - start
        bad = [r for r in mc if r["deviation"] > 5 * r["mc_error"] + 1e-12]
        verdicts["mc_identities"] = _verdict(not bad)
        witnesses["mc_identities"] = {"rows": mc, "failing": bad}
        tables["mc"] = (["member", "variant", "lambda", "t", "deviation", "mc_error"], mc)
    return _report("approximants", verdicts, witnesses, timings, {"seed": seed, "mc_n": n},
                   {"mc_sigmas": 5.0, "contractive_tol": 1e-9}, digest), tables


# -- stochastic --------------------------------------------------------------------

def cmd_stochastic(args, shared) -> tuple:
    seed = shared["seed"] if shared["seed"] is not None else 0
    n = args.n if args.n is not None else (shared["mc_n"] if shared["mc_n"] is not None else 1_000_000)
    if n < 2:
        raise UsageError("--n must be >= 2")
    if args.t < 0:
        raise UsageError("--t must be >= 0")
    try:
        law = law_from_name(args.law, rate=args.rate, drift=args.drift, diffusion=args.diffusion)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    sig = 5.0
    start = time.perf_counter()
    batch = sample(law, args.t, n, seed, threads=shared["threads"] or 1)
    x = batch.values
    mean_th, var_th = moments(law, args.t)
    mean_emp, var_emp = float(np.mean(x)), float(np.var(x, ddof=1))
    mean_se = math.sqrt(var_th / n)
    # standard error of the sample variance from the empirical fourth central moment
    m4 = float(np.mean((x - mean_emp) ** 4))
    var_se = math.sqrt(max(m4 - var_emp**2, 0.0) / n)
    omegas = args.omegas
    emp = np.atleast_1d(empirical_char_fn(batch, omegas))
    exact = np.atleast_1d(characteristic_fn(law, args.t, omegas))
    cf_dev = np.abs(emp - exact)
    rows = [{"quantity": "mean", "omega": "", "empirical_re": mean_emp, "empirical_im": 0.0,
             "exact_re": mean_th, "exact_im": 0.0, "deviation": abs(mean_emp - mean_th),
             "threshold": sig * mean_se},
            {"quantity": "variance", "omega": "", "empirical_re": var_emp, "empirical_im": 0.0,
             "exact_re": var_th, "exact_im": 0.0, "deviation": abs(var_emp - var_th),
             "threshold": sig * var_se}]
    for w, e, z, dev in zip(omegas, emp, exact, cf_dev):
        rows.append({"quantity": "char_fn", "omega": w, "empirical_re": e.real, "empirical_im": e.imag,
                     "exact_re": z.real, "exact_im": z.imag, "deviation": float(dev),
                     "threshold": sig / math.sqrt(n)})
    # the 1e-12 floor covers the Dirac law, whose standard errors vanish
    ok = {r["quantity"]: True for r in rows}
    for r in rows:
        ok[r["quantity"]] &= r["deviation"] <= r["threshold"] + 1e-12
    verdicts = {k: _verdict(v) for k, v in ok.items()}
    witnesses = {k: [r for r in rows if r["quantity"] == k] for k in ok}
    if args.split is not None:
        if not 0 < args.split < args.t:
            raise UsageError("--split must lie strictly between 0 and --t")
        dev = semigroup_law_check(law, args.split, args.t - args.split, n, omegas, seed)
        verdicts["semigroup_law"] = _verdict(dev <= sig / math.sqrt(n))
        witnesses["semigroup_law"] = {"s": args.split, "t": args.t - args.split, "max_deviation": dev,
                                      "threshold": sig / math.sqrt(n)}
    timings = {"sampling_and_checks": time.perf_counter() - start}
    header = ["quantity", "omega", "empirical_re", "empirical_im", "exact_re", "exact_im", "deviation", "threshold"]
    tables = {"stochastic": (header, rows)}
    return _report("stochastic", verdicts, witnesses, timings, {"seed": seed, "n": n},
                   {"mc_sigmas": sig}, extra={"law": law.describe(), "t": args.t}), tables


# -- counterexample ----------------------------------------------------------------

def cmd_counterexample(args, shared) -> tuple:
    d = args.d
    if d < 2:
        raise UsageError("--d must be >= 2")
    lo, hi = alpha_interval(d)
    alpha = args.alpha if args.alpha is not None else (0.8 if d == 2 else 0.5 * (lo + hi))
    seed = shared["seed"] if shared["seed"] is not None else 0
    spec = counterexample_spec(d, args.dim1, args.dim2, alpha, seed)
    if shared["tol_psd"] is not None:
        spec.tolerances = spec.tolerances.with_overrides(psd_tol=shared["tol_psd"])
    if shared["grid_max"] is not None:
        spec.grids["grid_max"] = int(shared["grid_max"])
    spec = spec_from_dict(spec.to_dict())      # same validation as a spec file
    fam = build_family(spec)
    if args.emit_spec:
        Path(args.emit_spec).write_text(spec.to_json())
    tol = spec.tolerances.psd_tol
    timings = {}
    spec_dev = max(spectrum_deviation(A) for A in fam.matrices)
    cfg = BatteryConfig(grid_max=spec.grids["grid_max"], tolerances=spec.tolerances,
                        threads=shared["threads"] or 1)
    start = time.perf_counter()
    full = run_equivalence_battery(fam, cfg)
    timings["full_battery"] = time.perf_counter() - start
    full_K = tuple(range(d))
    rep = complete_dissipativity_report(fam, tol)
    full_min = rep.verdicts[full_K].min_eigenvalue
    start = time.perf_counter()
    subsets = {}
    for C in all_subsets(d):
        if C and len(C) < d:
            subsets[_key(C)] = run_equivalence_battery(fam.subfamily(C), BatteryConfig(
                **{**cfg.__dict__, "threads": 1}))
    timings["subset_batteries"] = time.perf_counter() - start
    proper_min = min(v.min_eigenvalue for K, v in rep.verdicts.items() if len(K) < d)
    verdicts = {
        "construction_gates": _verdict(spec_dev <= 1e-9 and fam.commutator_bound <= 1e-12),
        "full_family_fails": _verdict(all(v == "FAIL" for v in full.verdicts.values()) and full_min < -1e-6),
        "proper_subsets_pass": _verdict(all(r.overall == "PASS" for r in subsets.values())
                                        and proper_min >= -tol),
    }
    witnesses = {
        "construction_gates": {"spectrum_deviation": spec_dev, "commutator_bound": fam.commutator_bound},
        "full_family_fails": {"K": _key(full_K), "min_eigenvalue": full_min, "verdicts": full.verdicts,
                              "witnesses": full.witnesses},
        "proper_subsets_pass": {"min_eigenvalue_over_proper_K": proper_min,
                                "rows": {k: r.verdicts for k, r in subsets.items()}},
    }
    tables = {"dissipation": (["K", "min_eigenvalue"],
                              [{"K": _key(K), "min_eigenvalue": v.min_eigenvalue} for K, v in rep.verdicts.items()])}
    return _report("counterexample", verdicts, witnesses, timings, {"seed": seed}, spec.tolerances.as_dict(),
                   spec.digest(), extra={"alpha": alpha, "d": d}), tables


# -- monoid ------------------------------------------------------------------------

def _group_for(variant: str, d: int, rng):
    if variant == "euclidean":
        return Euclidean(d)
    if variant == "heisenberg":
        return Heisenberg(d)
    if variant == "heisenberg-c":
        return CorrelatedHeisenberg.with_random_correlation(d, rng)
    if variant == "product":
        return Product([Euclidean(d), Heisenberg(1), CorrelatedHeisenberg.with_random_correlation(2, rng)])
    raise UsageError(f"unknown variant {variant!r}")


def cmd_monoid(args, shared) -> tuple:
    seed = shared["seed"] if shared["seed"] is not None else 0
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    if args.d < 1:
        raise UsageError("--d must be >= 1")
    rng = np.random.default_rng(seed)
    G = _group_for(args.variant, args.d, rng)
    start = time.perf_counter()
    rep = axioms_check(PositivityStructure(G), args.samples, seed)
    verdicts = {a: _verdict(rep.failures[a] == 0) for a in AXIOMS}
    witnesses = {a: {"failures": rep.failures[a], "worst_deviation": rep.worst[a],
                     "example": rep.examples.get(a)} for a in AXIOMS}
    if args.mutate:
        mrep = axioms_check(mutated_structure(G, args.mutate), args.samples, seed)
        verdicts["mutation_detected"] = _verdict(not mrep.passed)
        witnesses["mutation_detected"] = {"kind": args.mutate, "failures": mrep.failures,
                                          "examples": mrep.examples}
    timings = {"axioms": time.perf_counter() - start}
    rows = [{"axiom": a, "failures": rep.failures[a], "worst_deviation": rep.worst[a]} for a in AXIOMS]
    tables = {"axioms": (["axiom", "failures", "worst_deviation"], rows)}
    return _report("monoid", verdicts, witnesses, timings, {"seed": seed}, {"membership_tol": 1e-12},
                   extra={"group": G.describe()}), tables


# -- parser ------------------------------------------------------------------------

def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    shared = _Parser(add_help=False)
    for dest, (flag, typ) in SHARED.items():
        shared.add_argument(flag, dest=dest, type=typ, default=None,
                            help=f"(env {ENV_PREFIX}{dest.upper()})")
    shared.add_argument("--csv-dir", default=None, help="write CSV tables into this directory")

    p = _Parser(prog="dilationlab", description="Dilation checks for commuting semigroup families.")
    p.add_argument("--version", action="version", version=tool_version())
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("analyze", parents=[shared], help="run the equivalence battery on a FamilySpec")

    a = sub.add_parser("approximants", parents=[shared], help="convergence and expectation identities")
    a.add_argument("--dim", type=int, default=4, help="size of the random generator when no spec is given")
    a.add_argument("--lambdas", type=_floats, default=[1.0, 4.0, 16.0, 64.0, 256.0])

    s = sub.add_parser("stochastic", parents=[shared], help="moments and characteristic function of a law")
    s.add_argument("--law", required=True, help="dirac | scaled-poisson | aux-poisson | gaussian")
    s.add_argument("--lambda", dest="rate", type=float, default=1.0)
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--drift", type=float, default=0.0)
    s.add_argument("--diffusion", type=float, default=1.0)
    s.add_argument("--omegas", type=_floats, default=[-2.0, -1.0, -0.5, 0.5, 1.0, 2.0])
    s.add_argument("--split", type=float, default=None, help="also check Gamma(s) * Gamma(t-s) = Gamma(t)")

    c = sub.add_parser("counterexample", parents=[shared], help="build and check the block counterexample")
    c.add_argument("--d", type=int, default=2)
    c.add_argument("--dim1", type=int, default=4)
    c.add_argument("--dim2", type=int, default=2)
    c.add_argument("--alpha", type=float, default=None)
    c.add_argument("--emit-spec", default=None, help="write the FamilySpec for this family")

    m = sub.add_parser("monoid", parents=[shared], help="positivity-structure axioms")
    m.add_argument("--variant", default="euclidean", choices=["euclidean", "heisenberg", "heisenberg-c", "product"])
    m.add_argument("--d", type=int, default=2)
    m.add_argument("--samples", type=int, default=1000)
    m.add_argument("--mutate", choices=["identity", "abs"], default=None,
                   help="also run a broken positive-part map and require detection")
    return p


COMMANDS = {"analyze": cmd_analyze, "approximants": cmd_approximants, "stochastic": cmd_stochastic,
            "counterexample": cmd_counterexample, "monoid": cmd_monoid}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        shared = resolve_shared(args)
        report, tables = COMMANDS[args.command](args, shared)
    except (UsageError, SpecError, NonCommutingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = dump_report(report)
    if shared["out"]:
        Path(shared["out"]).parent.mkdir(parents=True, exist_ok=True)
        Path(shared["out"]).write_text(text)
    else:
        sys.stdout.write(text)
    if args.csv_dir:
        for name, (header, rows) in tables.items():
            write_csv(Path(args.csv_dir) / f"{name}.csv", header, rows)
    code = _exit_code(report["verdicts"])
    print(f"{args.command}: {'PASS' if code == 0 else 'FAIL'} "
          f"({sum(v == 'PASS' for v in report['verdicts'].values())}/{len(report['verdicts'])} checks)",
          file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
