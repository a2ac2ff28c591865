"""Command-line front end: dictionary analysis runs and the oracle suite.

``capset analyze`` drives the full pipeline (dictionary -> coherence
profile -> capacity vector/matrix -> estimation functions) and writes
CSV/JSON artifacts plus a reproducibility manifest.  ``capset oracle``
cross-checks the capacity machinery against exhaustive small-instance
oracles and exits nonzero on any violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import ef_classical, ef_grassmanian, ef_thm_a, ef_thm_b
from .capacity import (
    CapacityMatrix,
    CapacityVector,
    capacity_matrix,
    capacity_vector,
    load_capacity_matrix,
    load_capacity_vector,
    ratio_stats,
    save_capacity_matrix,
    save_capacity_vector,
    validate_capacity_invariants,
)
from .combinatorics import ef_count
from .dictionary import (
    Dictionary,
    babel_recovery_threshold,
    coherence_profile,
    gen_dct_pair,
    gen_random,
    gen_spoiled,
    grassmanian_mu,
    load_dictionary,
)
from .lp_core import NumericalFailure
from .sampling import (
    CoefficientModel,
    Support,
    ef_comp_b,
    ef_empirical,
    greedy_pair_partition,
    optimal_pair_partition,
    oracle_sign_pattern_test,
    oracle_val_c_gamma,
    save_variance_report,
    variance_experiment,
)

EF_CHOICES = ("emp", "cb", "gb", "thmA", "thmB", "compB", "count")
ORACLE_N_CAP = 8
ORACLE_L_CAP = 16
INEQ_TOL = 1e-8


class ConfigError(ValueError):
    """Invalid command-line configuration (exit code 3)."""


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _dict_hash(D: Dictionary) -> str:
    h = hashlib.sha256()
    h.update(str(D.matrix.shape).encode())
    h.update(D.matrix.tobytes())
    return h.hexdigest()[:24]


@dataclass
class AnalyzeConfig:
    family: str | None = None
    n: int | None = None
    l: int | None = None
    seed: int = 0
    load: str | None = None
    efs: list[str] = field(default_factory=list)
    samples: int = 1000
    var_samples: int = 10000
    d: int = 3
    jobs: int = 0  # 0 = auto
    out: str = "capset-out"
    coeff_model: str = "gaussian"
    ell_max: int | None = None
    variance: bool = False
    cache: bool = True
    cache_dir: str | None = None


def _build_dictionary(cfg: AnalyzeConfig) -> tuple[Dictionary, dict]:
    if cfg.load is not None:
        if cfg.family is not None:
            raise ConfigError("--load and --family are mutually exclusive")
        D = load_dictionary(cfg.load)
        digest = hashlib.sha256(Path(cfg.load).read_bytes()).hexdigest()
        desc = {"source": "file", "path": str(cfg.load), "sha256": digest,
                "N": D.n_rows, "L": D.n_atoms}
        return D, desc
    if cfg.family is None:
        raise ConfigError("one of --family or --load is required")
    if cfg.n is None:
        raise ConfigError("--n is required with --family")
    if cfg.family == "dct":
        D = gen_dct_pair(cfg.n)
    elif cfg.family == "random":
        l = cfg.l if cfg.l is not None else 2 * cfg.n
        D = gen_random(cfg.n, l, cfg.seed)
    elif cfg.family == "spoiled":
        l = cfg.l if cfg.l is not None else 2 * cfg.n
        D = gen_spoiled(cfg.n, l, cfg.seed)
    else:
        raise ConfigError(f"unknown family {cfg.family!r}")
    desc = {"source": "generated", "family": cfg.family, "N": D.n_rows,
            "L": D.n_atoms, "seed": cfg.seed, "label": D.label}
    return D, desc


def _cached_capacities(
    D: Dictionary, cfg: AnalyzeConfig, need_q: bool, need_Q: bool, timings: dict
) -> tuple[CapacityVector | None, CapacityMatrix | None]:
    cache_dir = Path(cfg.cache_dir) if cfg.cache_dir else Path(cfg.out) / ".cache"
    key = _dict_hash(D)
    q_path = cache_dir / f"{key}.q.csv"
    Q_path = cache_dir / f"{key}.Q.csv"
    jobs = cfg.jobs if cfg.jobs > 0 else (os.cpu_count() or 1)
    cv = cm = None
    L = D.n_atoms
    if need_q:
        t0 = time.perf_counter()
        if cfg.cache and q_path.exists():
            cv = load_capacity_vector(q_path)
            _log(f"[stage q] cache hit ({q_path})")
        else:
            _log(f"[stage q] solving {L} LPs (jobs={jobs})")
            cv = capacity_vector(D, jobs=jobs)
            if cfg.cache:
                cache_dir.mkdir(parents=True, exist_ok=True)
                save_capacity_vector(cv, q_path, label=D.label)
        timings["q"] = time.perf_counter() - t0
    if need_Q:
        t0 = time.perf_counter()
        if cfg.cache and Q_path.exists():
            cm = load_capacity_matrix(Q_path)
            _log(f"[stage Q] cache hit ({Q_path})")
        else:
            total = L * (L - 1)
            _log(f"[stage Q] solving {total} LPs (jobs={jobs})")

            def progress(done, total_pairs):
                if done % max(1, total_pairs // 10) < total_pairs // 100 + 1:
                    _log(f"[stage Q] {done}/{total_pairs} pairs")

            cm = capacity_matrix(D, jobs=jobs, progress=progress)
            if cfg.cache:
                cache_dir.mkdir(parents=True, exist_ok=True)
                save_capacity_matrix(cm, Q_path, label=D.label)
        timings["Q"] = time.perf_counter() - t0
    return cv, cm


def run_analysis(cfg: AnalyzeConfig) -> dict:
    """Execute the requested stages in dependency order; returns the report
    dict (also written to ``report.json`` along with the manifest and CSVs).
    """
    for ef in cfg.efs:
        if ef not in EF_CHOICES:
            raise ConfigError(f"unknown estimation function {ef!r}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    D, desc = _build_dictionary(cfg)
    timings["dictionary"] = time.perf_counter() - t0
    N, L = D.n_rows, D.n_atoms
    _log(f"[dictionary] {N}x{L} {D.label or desc.get('path', '')}")

    t0 = time.perf_counter()
    profile = coherence_profile(D)
    m_star = babel_recovery_threshold(profile)
    timings["profile"] = time.perf_counter() - t0

    need_q = bool({"thmA", "count"} & set(cfg.efs)) or cfg.variance
    need_Q = bool({"thmB", "compB"} & set(cfg.efs)) or cfg.variance
    # ratio statistics ride along whenever both sets are computed
    cv, cm = _cached_capacities(D, cfg, need_q or need_Q, need_Q, timings)

    report: dict = {
        "dictionary": desc,
        "coherence": {
            "mu": profile.mu,
            "grassmanian_mu": grassmanian_mu(N, L) if L > N else None,
            "babel_threshold": m_star,
        },
        "version": __version__,
    }

    if cv is not None:
        save_capacity_vector(cv, out / "q.csv", label=D.label)
        report["capacity_vector"] = {
            "E_q": cv.E_q, "var_q": cv.var_q,
            "2E_q": 2 * cv.E_q, "2var_q": 2 * cv.var_q,
        }
    if cm is not None:
        save_capacity_matrix(cm, out / "Q.csv", label=D.label)
        report["capacity_matrix"] = {"E_Q": cm.E_Q, "var_Q": cm.var_Q}
    if cv is not None and cm is not None:
        rs = ratio_stats(cv, cm)
        report["ratio"] = {
            "mean_R": rs.mean_R, "var_R": rs.var_R,
            "std_R": rs.std_R, "count": rs.count,
        }
        issues = validate_capacity_invariants(cv, cm, profile.mu_k, tol=INEQ_TOL)
        report["invariant_violations"] = issues
        if issues:
            _log(f"[invariants] {len(issues)} violations")

    efs = {}
    ells = None
    if cfg.ell_max is not None:
        ells = list(range(1, min(cfg.ell_max, L) + 1))
    for name in cfg.efs:
        t0 = time.perf_counter()
        if name == "cb":
            ef = ef_classical(profile.mu, L)
        elif name == "gb":
            ef = ef_grassmanian(N, L)
        elif name == "thmA":
            ef = ef_thm_a(cv, L)
        elif name == "count":
            ef = ef_count(cv, cfg.d, L)
        elif name == "thmB":
            ef = ef_thm_b(cm, L)
        elif name == "compB":
            _log(f"[EF-compB] sampling M={cfg.samples} per size")
            ef = ef_comp_b(cm, L, cfg.samples, cfg.seed, ells=ells)
        elif name == "emp":
            n_ells = len(ells) if ells is not None else L
            _log(f"[EF-emp] {cfg.samples * n_ells} recovery LPs")
            model = (CoefficientModel.UnitSigns if cfg.coeff_model == "signs"
                     else CoefficientModel.GaussianNonzeros)
            ef = ef_empirical(D, cfg.samples, cfg.seed, coeff_model=model, ells=ells)
        ef.save_csv(out / f"ef_{ef.label}.csv")
        efs[ef.label] = {str(ell): ef.values[ell] for ell in ef.domain()}
        timings[f"ef_{name}"] = time.perf_counter() - t0
        _log(f"[EF {ef.label}] done in {timings[f'ef_{name}']:.2f}s")
    if efs:
        report["estimation_functions"] = efs

    if cfg.variance:
        t0 = time.perf_counter()
        rep = variance_experiment(cv, cm, L, cfg.var_samples, cfg.seed,
                                  max_ell=N // 2)
        save_variance_report(rep, out / "variance.csv")
        report["variance_experiment"] = {
            "n_samples": rep.n_samples,
            "violations": rep.violations(),
        }
        timings["variance"] = time.perf_counter() - t0

    manifest = {
        "tool": "capset",
        "version": __version__,
        "dictionary": desc,
        "efs": cfg.efs,
        "params": {
            "samples": cfg.samples, "var_samples": cfg.var_samples,
            "d": cfg.d, "coeff_model": cfg.coeff_model,
            "ell_max": cfg.ell_max, "variance": cfg.variance,
        },
        "master_seed": cfg.seed,
        "timings_s": {k: round(v, 3) for k, v in timings.items()},
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (out / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _log(f"[done] artifacts in {out}")
    return report


@dataclass
class OracleConfig:
    n: int = 6
    l: int = 12
    seed: int = 0
    load: str | None = None
    supports: int = 50
    max_support: int = 4
    force: bool = False
    inject_fault: bool = False


def run_oracle_suite(cfg: OracleConfig) -> dict:
    """Cross-check capacity bounds against exhaustive oracles on a small
    dictionary; any violation is a defect (or an injected fault)."""
    if cfg.load is not None:
        D = load_dictionary(cfg.load)
    else:
        D = gen_random(cfg.n, cfg.l, cfg.seed)
    N, L = D.n_rows, D.n_atoms
    if (N > ORACLE_N_CAP or L > ORACLE_L_CAP) and not cfg.force:
        raise ConfigError(
            f"oracle suite caps at {ORACLE_N_CAP}x{ORACLE_L_CAP}; "
            f"got {N}x{L} (use --force to override)"
        )
    _log(f"[oracle] dictionary {N}x{L}, {cfg.supports} supports")
    cv = capacity_vector(D)
    cm = capacity_matrix(D)
    if cfg.inject_fault:
        _log("[oracle] FAULT INJECTION: halving the capacity vector")
        cv = CapacityVector.from_values(cv.q * 0.5)

    rng = np.random.default_rng(cfg.seed)
    violations: list[str] = []
    checked = {"lemma": 0, "qsum": 0, "pairing": 0, "matching": 0}
    for t in range(cfg.supports):
        size = int(rng.integers(1, cfg.max_support + 1))
        sup = Support(tuple(rng.choice(L, size=size, replace=False)))
        val = oracle_val_c_gamma(D, sup)
        qsum = float(cv.q[sup.as_array()].sum())
        checked["qsum"] += 1
        if val > qsum + INEQ_TOL:
            violations.append(f"val(C)={val:.6g} > sum q={qsum:.6g} on {sup.indices}")
        if val < 0.5:
            checked["lemma"] += 1
            if not oracle_sign_pattern_test(D, sup):
                violations.append(
                    f"val(C)={val:.6g} < 1/2 but sign-pattern recovery failed "
                    f"on {sup.indices}"
                )
        if size % 2 == 0 and size >= 2:
            part = greedy_pair_partition(cm, sup)
            greedy_sum = part.total(cm)
            checked["pairing"] += 1
            if val > greedy_sum + INEQ_TOL:
                violations.append(
                    f"val(C)={val:.6g} > pairing sum={greedy_sum:.6g} on {sup.indices}"
                )
            _, opt_sum = optimal_pair_partition(cm, sup)
            checked["matching"] += 1
            if greedy_sum < opt_sum - INEQ_TOL:
                violations.append(
                    f"greedy sum={greedy_sum:.6g} below optimal={opt_sum:.6g} "
                    f"on {sup.indices}"
                )
    # constant-matrix sanity: greedy equals the optimal matching exactly
    const = CapacityMatrix.from_values(np.full((8, 8), 0.05))
    sup = Support(tuple(range(6)))
    g = greedy_pair_partition(const, sup).total(const)
    _, o = optimal_pair_partition(const, sup)
    if abs(g - o) > 1e-12:
        violations.append(f"constant-matrix greedy {g} != optimal {o}")

    report = {
        "dictionary": {"N": N, "L": L, "seed": cfg.seed},
        "supports_checked": cfg.supports,
        "checks": checked,
        "violations": violations,
        "fault_injected": cfg.inject_fault,
    }
    for v in violations:
        _log(f"[oracle] VIOLATION: {v}")
    _log(f"[oracle] {len(violations)} violations")
    return report


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # config errors exit with code 3
        self.print_usage(sys.stderr)
        self.exit(3, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    p = _Parser(prog="capset", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="analyze a dictionary's capacity sets")
    a.add_argument("--family", choices=["random", "spoiled", "dct"])
    a.add_argument("--n", type=int, help="rows (signal dimension)")
    a.add_argument("--l", type=int, help="columns (atoms); default 2n")
    a.add_argument("--seed", type=int, default=0, help="master seed")
    a.add_argument("--load", metavar="PATH", help="load a dictionary CSV")
    a.add_argument("--ef", default="", metavar="LIST",
                   help=f"comma list of {','.join(EF_CHOICES)}")
    a.add_argument("--samples", type=int, default=1000,
                   help="Monte-Carlo supports per size (default 1000)")
    a.add_argument("--var-samples", type=int, default=10000,
                   help="samples for the variance experiment (default 10000)")
    a.add_argument("--d", type=int, default=3,
                   help="quantization levels for EF-count (default 3)")
    a.add_argument("--jobs", type=int, default=0,
                   help="worker processes for capacity LPs (default: all cores)")
    a.add_argument("--out", default="capset-out", help="output directory")
    a.add_argument("--coeff-model", choices=["gaussian", "signs"],
                   default="gaussian")
    a.add_argument("--ell-max", type=int, default=None,
                   help="cap sampled support sizes for emp/compB")
    a.add_argument("--variance", action="store_true",
                   help="run the variance experiment")
    a.add_argument("--no-cache", action="store_true",
                   help="bypass the capacity stage cache")
    a.add_argument("--cache-dir", default=None)

    o = sub.add_parser("oracle", help="run the exhaustive small-instance oracle suite")
    o.add_argument("--n", type=int, default=6)
    o.add_argument("--l", type=int, default=12)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--load", metavar="PATH")
    o.add_argument("--supports", type=int, default=50)
    o.add_argument("--max-support", type=int, default=4)
    o.add_argument("--force", action="store_true",
                   help="allow dictionaries beyond the oracle caps")
    o.add_argument("--inject-fault", action="store_true",
                   help="self-test: corrupt q and expect violations")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "analyze":
            cfg = AnalyzeConfig(
                family=args.family, n=args.n, l=args.l, seed=args.seed,
                load=args.load,
                efs=[e for e in args.ef.split(",") if e],
                samples=args.samples, var_samples=args.var_samples,
                d=args.d, jobs=args.jobs, out=args.out,
                coeff_model=args.coeff_model, ell_max=args.ell_max,
                variance=args.variance, cache=not args.no_cache,
                cache_dir=args.cache_dir,
            )
            report = run_analysis(cfg)
            print(json.dumps(report, indent=2, sort_keys=True))
            return 0
        report = run_oracle_suite(OracleConfig(
            n=args.n, l=args.l, seed=args.seed, load=args.load,
            supports=args.supports, max_support=args.max_support,
            force=args.force, inject_fault=args.inject_fault,
        ))
        print(json.dumps(report, indent=2, sort_keys=True))
        return 0 if not report["violations"] else 1
    except ConfigError as exc:
        _log(f"config error: {exc}")
        return 3
    except NumericalFailure as exc:
        _log(f"numerical failure: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
