"""Command-line entry point.

    almostprime <command> [--config FILE] [--key value ...]

Every flag mirrors a config key and overrides the file. The report goes to
stdout as JSON; ``--csv PATH`` also writes the value table. Exit codes:
0 success, 1 verification failures, 2 invalid input, 3 budget refusal,
4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from fractions import Fraction
from typing import Any, Dict, List, Optional

from . import acceptance, circle, padic, sieve
from .arith import primes_upto
from .cache import ResultCache, canonical_key
from .counter import (
    BoxSpec,
    CongruenceRestriction,
    ScanStats,
    count_almost_prime_solutions,
    fast_count,
    sieve_weighted_sum,
)
from .errors import BudgetExceeded, ValidationError
from .fixtures import fixture
from .forms import FormSystem, LinearFamily, as_target
from .report import ExperimentReport, ReportValue

COMMANDS = ["count", "almost-prime", "sieve-sum", "local", "euler-sum", "circle", "predict", "verify"]

EXIT_OK, EXIT_FAILED, EXIT_INVALID, EXIT_BUDGET, EXIT_INTERNAL = 0, 1, 2, 3, 4


def _ints(text: str) -> List[int]:
    return [int(t) for t in text.split(",") if t.strip()]


# config key -> flag parser; flags are --key with '_' spelled '-'
FLAGS = {
    "fixture": str,
    "v": _ints,
    "N": int,
    "D": int,
    "s": _ints,
    "b": _ints,
    "eps": float,
    "eta": float,
    "R": float,
    "m": int,
    "omega": int,
    "q": int,
    "primes": _ints,
    "levels": _ints,
    "P_max": int,
    "Q_max": int,
    "level_cap": int,
    "seed": int,
    "samples": int,
    "delta": float,
    "budget": int,
    "workers": int,
    "kind": str,
    "gamma_model": str,
    "only": _ints,
}

# keys that never change computed values
NON_VALUE_KEYS = {"workers", "cache"}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="almostprime", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--csv", help="also write the value table to this CSV path")
    ap.add_argument("--no-cache", action="store_true")
    ap.add_argument("--cache-dir", help="cache directory (default: $ALMOSTPRIME_CACHE_DIR)")
    ap.add_argument("-q", "--quiet", action="store_true", help="no progress lines on stderr")
    for key, typ in FLAGS.items():
        flag = "--" + key.replace("_", "-")
        ap.add_argument(flag, dest=key, type=typ, default=None)
    return ap


# ---------------------------
# Config handling
# ---------------------------

def load_config(args: argparse.Namespace) -> Dict[str, Any]:
    cfg: Dict[str, Any] = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise ValidationError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ValidationError("config must be a JSON object")
    for key in FLAGS:
        val = getattr(args, key)
        if val is not None:
            if key == "fixture":
                cfg["system"] = {"fixture": val}
            else:
                cfg[key] = val
    return cfg


def system_from_config(cfg: dict) -> FormSystem:
    spec = cfg.get("system")
    if spec is None:
        raise ValidationError("config needs 'system' (a fixture name or n/forms)")
    if isinstance(spec, str):
        spec = {"fixture": spec}
    if "fixture" in spec:
        try:
            return fixture(spec["fixture"])
        except KeyError as exc:
            raise ValidationError(str(exc.args[0])) from None
    try:
        return FormSystem.from_json(spec)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"bad system spec: {exc}") from None


def linear_from_config(cfg: dict, F: FormSystem) -> LinearFamily:
    rows = cfg.get("linear")
    if rows is None:
        return LinearFamily.coordinates(F.n, range(F.n))
    L = LinearFamily.from_rows(rows, F.n)
    return L


def _need(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise ValidationError(f"missing config key(s): {', '.join(missing)}")


def _check_vector(cfg: dict, key: str, length: int) -> None:
    if cfg.get(key) is not None and len(cfg[key]) != length:
        raise ValidationError(f"'{key}' has length {len(cfg[key])}, expected {length}")


def _prime_list(cfg: dict) -> List[int]:
    if cfg.get("primes"):
        return list(cfg["primes"])
    return primes_upto(cfg.get("P_max", 13))


def _gamma_source(cfg: dict, F: Optional[FormSystem], L: Optional[LinearFamily]):
    model = cfg.get("gamma_model") or (cfg.get("gamma") or {}).get("model", "synthetic")
    g = cfg.get("gamma") or {}
    if model == "synthetic":
        return sieve.SyntheticGamma(int(g.get("m", cfg.get("m", 1)))), {"model": "synthetic", "m": g.get("m", cfg.get("m", 1))}
    if model == "table":
        table = {int(p): Fraction(str(val)) for p, val in g.get("table", {}).items()}
        return sieve.TableGamma(table), {"model": "table", "primes": sorted(table)}
    if model == "padic":
        if F is None:
            raise ValidationError("gamma model 'padic' needs a system")
        level = int(g.get("level", 2))
        v = as_target(cfg["v"], F)
        src = lambda p: padic.gamma_p(F, L, v, p, level, cfg.get("budget")).value
        return src, {"model": "padic", "level": level}
    raise ValidationError(f"unknown gamma model {model!r}")


# ---------------------------
# Commands
# ---------------------------

def cmd_count(cfg, rep: ExperimentReport, stats: ScanStats) -> None:
    F = system_from_config(cfg)
    _need(cfg, "v", "N")
    _check_vector(cfg, "s", F.n)
    c = CongruenceRestriction(cfg.get("D", 1), tuple(cfg.get("s") or ()))
    cnt = fast_count(F, cfg["v"], BoxSpec(cfg["N"], F.n), c, cfg.get("budget"), cfg.get("workers", 1))
    rep.add("count", cnt, "exact", N=cfg["N"], D=c.D, s=list(c.residues(F.n)), system=F.digest())


def cmd_almost_prime(cfg, rep, stats) -> None:
    F = system_from_config(cfg)
    L = linear_from_config(cfg, F)
    _need(cfg, "v", "N", "eps")
    box = BoxSpec(cfg["N"], F.n)
    cnt = count_almost_prime_solutions(F, L, cfg["v"], box, cfg["eps"], cfg.get("budget"), cfg.get("workers", 1), stats)
    rep.add("almost_prime_count", cnt, "exact", N=cfg["N"], eps=cfg["eps"], threshold=cfg["N"] ** cfg["eps"], m=L.m)
    total = fast_count(F, cfg["v"], box, None, cfg.get("budget"), cfg.get("workers", 1))
    rep.add("count", total, "exact", N=cfg["N"])


def _plan(cfg: dict, m: int) -> sieve.SievePlan:
    _need(cfg, "N")
    if cfg.get("R") is not None:
        return sieve.SievePlan(m, cfg["N"], cfg["R"], cfg.get("omega", 1), cfg.get("eps"))
    _need(cfg, "eta", "eps")
    return sieve.SievePlan.from_exponents(m, cfg["N"], cfg["eta"], cfg["eps"], cfg.get("omega", 1))


def cmd_sieve_sum(cfg, rep, stats) -> None:
    F = system_from_config(cfg)
    L = linear_from_config(cfg, F)
    _need(cfg, "v")
    _check_vector(cfg, "b", F.n)
    plan = _plan(cfg, L.m)
    val = sieve_weighted_sum(
        F, L, cfg["v"], BoxSpec(plan.N, F.n), plan, cfg.get("b"), cfg.get("q"),
        budget=cfg.get("budget"), workers=cfg.get("workers", 1), stats=stats,
    )
    rep.add("sieve_sum", val, "float", plan=plan.to_json(), b=cfg.get("b"), q=cfg.get("q"),
            note="|l_i(x)| used for negative values; zeros excluded")


def cmd_local(cfg, rep, stats) -> None:
    F = system_from_config(cfg)
    _need(cfg, "v")
    _check_vector(cfg, "s", F.n)
    v = as_target(cfg["v"], F)
    D = cfg.get("D", 1)
    s = cfg.get("s")
    levels = cfg.get("levels") or [1, 2]
    budget = cfg.get("budget")
    for p in _prime_list(cfg):
        for l in levels:
            d = padic.sigma_p_l(F, v, p, l, D, s, budget=budget)
            rep.add(f"sigma_{p}^{l}", d.value, "exact", p=p, level=l, route=d.route, D=D, s=s)
        st = padic.sigma_p_stabilized(F, v, p, D, s, l_max=max(levels), budget=budget)
        rep.add(f"sigma_{p}_stabilized", st.value, "exact", p=p, level=st.level, stabilized=st.stabilized)
        if cfg.get("linear") is not None:
            L = linear_from_config(cfg, F)
            l = max(levels)
            star = padic.sigma_star_p(F, L, v, p, l, budget=budget)
            rep.add(f"sigma_star_{p}", star.value, "exact", p=p, level=l)
            g = padic.gamma_p(F, L, v, p, l, budget)
            rep.add(f"gamma_{p}", g.value, "exact", p=p, level=l, m_over_p=L.m / p)


def cmd_euler_sum(cfg, rep, stats) -> None:
    F = L = None
    if cfg.get("system") is not None:
        F = system_from_config(cfg)
        L = linear_from_config(cfg, F)
    _need(cfg, "R")
    m = cfg.get("m") or (L.m if L is not None else 1)
    omega = cfg.get("omega", 1)
    W = sieve.SievePlan(m, 1, cfg["R"], omega).W
    gamma, gdesc = _gamma_source(cfg, F, L)
    f = sieve.WeightFunction(m)
    S = sieve.euler_sieve_sum(gamma, f, cfg["R"], W, cfg.get("q"), cfg.get("D_max"))
    P = sieve.sieve_sum_main_term(m, cfg["R"], W, cfg.get("q"))
    meta = dict(m=m, R=cfg["R"], omega=omega, W=W, q=cfg.get("q"), gamma=gdesc, truncation="d1, d2 < R")
    rep.add("euler_sum", S, "float", **meta)
    rep.add("main_term", P, "float", **meta)
    rep.add("ratio", S / P if P else math.nan, "float", **meta)


def cmd_circle(cfg, rep, stats) -> None:
    F = system_from_config(cfg)
    _need(cfg, "v")
    _check_vector(cfg, "s", F.n)
    v = as_target(cfg["v"], F)
    D = cfg.get("D", 1)
    Q = cfg.get("Q_max", 20)
    ss = circle.singular_series(F, v, D, cfg.get("s"), Q, cfg.get("budget"))
    rep.add("singular_series", ss.value.real, "float", truncation=Q, imag=ss.value.imag,
            tail_proxy=ss.tail_proxy, terms=ss.to_json()["terms"])
    if cfg.get("N") is not None:
        u = [a / cfg["N"] ** F.k for a in v]
        J = circle.singular_integral_J(F, u, samples=cfg.get("samples", 10**6), delta=cfg.get("delta"), seed=cfg.get("seed", 0))
        rep.add("singular_integral", J.value, "estimate", seed=J.seed, stderr=J.stderr, samples=J.samples,
                delta=J.delta, halved_value=J.halved_value, u=u)
    for p in cfg.get("primes") or []:
        for l in cfg.get("levels") or [1, 2]:
            val = circle.local_factor_via_gauss(F, v, p, l, D, cfg.get("s"), cfg.get("budget"))
            rep.add(f"sigma_{p}^{l}_via_gauss", val, "float", p=p, level=l)


def cmd_predict(cfg, rep, stats) -> None:
    kind = cfg.get("kind", "birch")
    if kind == "sieve_sum":
        _need(cfg, "R")
        m = cfg.get("m", 1)
        W = sieve.SievePlan(m, 1, cfg["R"], cfg.get("omega", 1)).W
        val = sieve.predicted_main_term("sieve_sum", m=m, R=cfg["R"], W=W, q=cfg.get("q"))
        rep.add("main_term", val, "float", prediction=kind, m=m, R=cfg["R"], W=W, q=cfg.get("q"))
        return
    F = system_from_config(cfg)
    _need(cfg, "v", "N")
    v = as_target(cfg["v"], F)
    N = cfg["N"]
    seed = cfg.get("seed", 0)
    samples = cfg.get("samples", 10**6)
    u = [a / N**F.k for a in v]
    J = circle.singular_integral_J(F, u, samples=samples, delta=cfg.get("delta"), seed=seed)
    Jmeta = dict(seed=seed, samples=samples, stderr=J.stderr, delta=J.delta)
    if kind == "birch":
        _check_vector(cfg, "s", F.n)
        P = circle.birch_prediction(F, v, N, cfg.get("D", 1), cfg.get("s"), cfg.get("P_max", 50),
                                    cfg.get("level_cap", 4096), J=J)
        rep.add("main_term", P.value, "float", prediction=kind, truncation=f"p <= {P.P_max}",
                local_product=P.local_product, J=J.value, **Jmeta)
        return
    if kind not in ("weighted_count", "refined_count"):
        raise ValidationError(f"unknown prediction kind {kind!r}")
    L = linear_from_config(cfg, F)
    m = L.m
    _need(cfg, "R")
    primes = _prime_list(cfg)
    if cfg.get("sigma_star") is not None:
        local = float(cfg["sigma_star"])
    elif J.value == 0:
        local = 0.0
    else:
        level = max(cfg.get("levels") or [2])
        local = 1.0
        for p in primes:
            local *= float(padic.sigma_star_p(F, L, v, p, level, budget=cfg.get("budget")).value)
    sigma_star = J.value * local if cfg.get("sigma_star") is None else local
    inputs = dict(m=m, N=N, n=F.n, r=F.r, k=F.k, R=cfg["R"], sigma_star=sigma_star)
    if kind == "refined_count":
        _need(cfg, "eps", "eta")
        inputs.update(eps=cfg["eps"], eta=cfg["eta"])
    val = sieve.predicted_main_term(kind, **inputs)
    rep.add("main_term", val, "float", prediction=kind, sigma_star=sigma_star, J=J.value,
            truncation=f"p in {primes}", **Jmeta)
    c = sieve.sieve_constants(m)
    rep.add("constant_ratio", c.ratio, "float", note="c'_{m+1}/c_m from exact constants",
            max_eps_over_eta=sieve.max_eps_over_eta(m))


def cmd_verify(cfg, rep, stats) -> bool:
    results = acceptance.run_all(cfg.get("only"))
    for res in results:
        rep.add(res.name, res.passed, "check", **res.detail, seconds=res.seconds, line=res.line())
    return all(r.passed for r in results)


HANDLERS = {
    "count": cmd_count,
    "almost-prime": cmd_almost_prime,
    "sieve-sum": cmd_sieve_sum,
    "local": cmd_local,
    "euler-sum": cmd_euler_sum,
    "circle": cmd_circle,
    "predict": cmd_predict,
    "verify": cmd_verify,
}


def run(command: str, cfg: Dict[str, Any], cache: Optional[ResultCache] = None) -> tuple:
    """Execute one command; returns (report, exit code)."""
    rep = ExperimentReport(command, dict(cfg))
    stats = ScanStats()
    t0 = time.perf_counter()
    code = EXIT_OK
    key = None
    try:
        if command not in HANDLERS:
            raise ValidationError(f"unknown command {command!r}")
        if cache is not None and command != "verify":
            key = canonical_key("cli", command, {k: v for k, v in cfg.items() if k not in NON_VALUE_KEYS})
            hit = cache.get(key)
            if hit is not None:
                rep.values = [ReportValue(**d) for d in hit]
                rep.cached = True
        if not rep.cached:
            ok = HANDLERS[command](cfg, rep, stats)
            if command == "verify" and not ok:
                code = EXIT_FAILED
            elif key is not None:
                cache.put(key, [v.to_json() for v in rep.values])
    except BudgetExceeded as exc:
        rep.error = exc.to_dict()
        code = EXIT_BUDGET
    except ValidationError as exc:
        rep.error = exc.to_dict()
        code = EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - surfaced as a structured internal error
        rep.error = {"error": type(exc).__name__, "message": str(exc), "internal": True}
        code = EXIT_INTERNAL
    rep.timings["total_seconds"] = time.perf_counter() - t0
    rep.warnings.extend(stats.warnings)
    if cache is not None:
        rep.warnings.extend(cache.warnings)
    return rep, code


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except ValidationError as exc:
        rep = ExperimentReport(args.command, {})
        rep.error = exc.to_dict()
        print(rep.dumps())
        return EXIT_INVALID
    cache = None if args.no_cache else ResultCache(args.cache_dir)
    rep, code = run(args.command, cfg, cache)
    if args.command == "verify" and not args.quiet:
        for rv in rep.values:
            print(rv.meta["line"], file=sys.stderr)
    print(rep.dumps())
    if args.csv:
        try:
            with open(args.csv, "w", newline="") as fh:
                fh.write(rep.to_csv())
        except OSError as exc:
            print(json.dumps({"error": "OSError", "message": f"cannot write CSV: {exc}"}), file=sys.stderr)
            return code or EXIT_INVALID
    return code


if __name__ == "__main__":
    sys.exit(main())
