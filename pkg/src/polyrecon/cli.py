"""Command-line front end.

    polyrecon classify --coeffs '[[0,0],[0,0],[0,1]]'
    polyrecon entropy  --coeffs '[-1, 0, 1]' --seed 1
    polyrecon mirrors  --poly p.json --out results/
    polyrecon tau      --coeffs ... --seed 1
    polyrecon cantor   --d 2 --c 1e4 --seed 0
    polyrecon julia    --coeffs ... --samples 5000 --seed 0

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 non-generic
behaviour detected, 5 certificate failure.  Reports are JSON with sorted keys
and embed the resolved configuration and the package version.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io as pio
from .cantor import (
    escape_certificate,
    itinerary_to_point,
    make_spec,
    modulus_identity_check,
    no_mirror_certificate,
    point_to_itinerary,
    projection_disjointness,
)
from .entropy import bowen_entropy, partition_entropy, pushforward, sample_equilibrium
from .errors import (
    AmbiguousImage,
    CertificateFailed,
    CTooSmall,
    NoPreimage,
    PolyreconError,
)
from .mirrors import collect_mirror_sources
from .poly import ComplexPolynomial, classify, iterate, sample_julia
from .reconstruction import estimate_M, estimate_N, phi, preimage_windows, tau

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_NONGENERIC, EXIT_CERT = 0, 2, 3, 4, 5

STOCHASTIC = {"entropy", "tau", "cantor", "julia"}

DEFAULTS = {
    "n_window": None,
    "samples": None,
    "depth": 60,
    "seed": None,
    "eps": [0.02, 0.05, 0.1],
    "n_range": [4, 12],
    "region": None,
    "tol": None,
    "threads": None,
    "out": None,
    "box_size": 0.1,
    "M": None,
    "jitter": 0.0,
    "d": 2,
    "psi": math.pi / math.sqrt(5),
    "c": 1e4,
    "pairs": 10_000,
}


class InputError(Exception):
    pass


def _float_list(text):
    try:
        vals = json.loads(text) if text.strip().startswith("[") else [float(x) for x in text.split(",")]
        return [float(v) for v in vals]
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}") from exc


def _int_pair(text):
    vals = _float_list(text)
    if len(vals) != 2 or any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError("expected two integers, e.g. 4,12")
    return [int(v) for v in vals]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--poly", help="polynomial JSON file")
    src.add_argument("--coeffs", help="polynomial as JSON, ascending degree")
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--n-window", dest="n_window", type=int, default=argparse.SUPPRESS)
    common.add_argument("--samples", type=int, default=argparse.SUPPRESS)
    common.add_argument("--depth", type=int, default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--eps", type=_float_list, default=argparse.SUPPRESS, help="fractions of the support diameter")
    common.add_argument("--n-range", dest="n_range", type=_int_pair, default=argparse.SUPPRESS, help="first,last")
    common.add_argument("--region", type=_float_list, default=argparse.SUPPRESS, help="xmin,xmax,ymin,ymax")
    common.add_argument("--tol", type=float, default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")

    p = argparse.ArgumentParser(prog="polyrecon", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"polyrecon {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("classify", parents=[common], help="exceptional classification")
    e = sub.add_parser("entropy", parents=[common], help="entropy of the pushed-forward equilibrium measure")
    e.add_argument("--box-size", dest="box_size", type=float, default=argparse.SUPPRESS)
    sub.add_parser("mirrors", parents=[common], help="mirrored pairs, N and M estimates")
    t = sub.add_parser("tau", parents=[common], help="round trip of the inverse window map")
    t.add_argument("--M", type=int, default=argparse.SUPPRESS)
    t.add_argument("--jitter", type=float, default=argparse.SUPPRESS, help="perturbation radius around Julia samples")
    c = sub.add_parser("cantor", parents=[common], help="certificates for i z^d - e^{i psi} c")
    c.add_argument("--d", type=int, default=argparse.SUPPRESS)
    c.add_argument("--psi", type=float, default=argparse.SUPPRESS)
    c.add_argument("--c", type=float, default=argparse.SUPPRESS)
    c.add_argument("--pairs", type=int, default=argparse.SUPPRESS)
    sub.add_parser("julia", parents=[common], help="Julia set samples as CSV")
    return p


def resolve_config(args) -> dict:
    cfg = dict(DEFAULTS)
    flags = vars(args).copy()
    command = flags.pop("command")
    if flags.get("config"):
        try:
            cfg.update(json.loads(Path(flags["config"]).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config: {exc}") from exc
    flags.pop("config", None)
    for k, v in flags.items():
        if v is not None:
            cfg[k] = v
    cfg["command"] = command
    if cfg.get("seed") is None and command in STOCHASTIC:
        raise InputError(f"'{command}' is stochastic and needs --seed")
    for key in ("samples", "depth", "n_window", "threads", "pairs", "M"):
        if cfg.get(key) is not None and cfg[key] <= 0 and not (key == "M" and cfg[key] == 0):
            raise InputError(f"--{key.replace('_', '-')} must be positive")
    return cfg


def _polynomial(cfg) -> ComplexPolynomial:
    if cfg.get("poly"):
        P = pio.load_polynomial(Path(cfg["poly"]))
    elif cfg.get("coeffs") is not None:
        raw = cfg["coeffs"]
        P = pio.load_polynomial(raw if isinstance(raw, str) else json.dumps(raw))
    else:
        raise InputError("no polynomial given (--poly or --coeffs)")
    if P.degree < 2:
        raise InputError("polynomial degree must be >= 2")
    return P


_COMMAND_KEYS = {
    "classify": ("tol", "seed"),
    "entropy": ("samples", "depth", "seed", "n_window", "eps", "n_range", "box_size"),
    "mirrors": ("tol",),
    "tau": ("samples", "depth", "seed", "n_window", "M", "jitter", "region", "tol"),
    "cantor": ("d", "psi", "c", "pairs", "seed"),
    "julia": ("samples", "depth", "seed"),
}


def _public_config(cfg, P=None) -> dict:
    """The resolved parameters of the command (thread count and paths excluded)."""
    out = {k: cfg.get(k) for k in _COMMAND_KEYS[cfg["command"]]}
    out["command"] = cfg["command"]
    if P is not None:
        out["polynomial"] = P.to_json_obj()
    return out


def _report(cfg, P, result) -> dict:
    return {"version": __version__, "config": _public_config(cfg, P), "result": result}


def _emit(cfg, report, files=None):
    text = pio.dumps_report(report)
    out = cfg.get("out")
    if out:
        pio.write_text(Path(out) / f"{cfg['command']}.json", text)
        for name, content in (files or {}).items():
            pio.write_text(Path(out) / name, content)
    sys.stdout.write(text)


def _threads(cfg) -> int:
    return int(cfg.get("threads") or os.cpu_count() or 1)


# ----------------------------------------------------------------------------
# commands


def cmd_classify(cfg) -> int:
    P = _polynomial(cfg)
    cl = classify(P, tol=cfg.get("tol") or 1e-10, seed=cfg.get("seed") or 0)
    res = cl.to_json_obj()
    pio.validate(res, pio.CLASSIFY_SCHEMA)
    _emit(cfg, _report(cfg, P, res))
    return EXIT_OK


def cmd_entropy(cfg) -> int:
    P = _polynomial(cfg)
    n_samples = cfg.get("samples") or 200_000
    N = cfg.get("n_window") or 1
    lo, hi = cfg["n_range"]
    try:
        m = sample_equilibrium(P, n_samples, cfg["depth"], seed=cfg["seed"])
        X = pushforward(P, m, N)
        spread = float(np.max(X.max(axis=0) - X.min(axis=0)))
        bowen = bowen_entropy(P, m, N, range(lo, hi + 1), cfg["eps"], seed=cfg["seed"], workers=_threads(cfg))
        part = partition_entropy(P, m, N, box_size=cfg["box_size"], n_max=hi)
    except PolyreconError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    res = {
        "bowen": bowen.to_json_obj(),
        "partition": part.to_json_obj(),
        "target_log_d": math.log(P.degree),
        "dirac": bool(spread < 1e-8),
        "window_spread": spread,
        "plateau": bowen.plateau,
    }
    pio.validate(res["bowen"], pio.ENTROPY_SCHEMA)
    pio.validate(res["partition"], pio.ENTROPY_SCHEMA)
    files = {"measure.csv": pio.points_csv(m.points, m.weights)} if cfg.get("out") else None
    _emit(cfg, _report(cfg, P, res), files=files)
    return EXIT_OK


def _pair_json(p):
    return {"z": pio.complex_pair(p.z), "w": pio.complex_pair(p.w)}


def cmd_mirrors(cfg) -> int:
    P = _polynomial(cfg)
    tol = cfg.get("tol") or 1e-8
    try:
        sources = collect_mirror_sources(P, tol=tol)
        N_est = estimate_N(P, None, sources, tol)
        M_hat, unbroken = estimate_M(P, sources, max_k=30, tol=tol)
    except PolyreconError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    by_source = {}
    for p in sources:
        by_source[p.source] = by_source.get(p.source, 0) + 1
    res = {
        "N_hat": N_est.N_hat,
        "M_hat": M_hat,
        "unbroken_pairs": [_pair_json(p) for p in unbroken],
        "evidence": {
            "N0": N_est.N0,
            "N_scan": {str(k): v for k, v in N_est.evidence.items()},
            "pairs_by_source": by_source,
            "break_times": sorted({p.break_time for p in sources if p.break_time is not None}),
        },
    }
    pio.validate(res, pio.MIRRORS_SCHEMA)
    files = {"mirrors.csv": pio.csv_text("mirrors", (p.csv_row() for p in sources))}
    _emit(cfg, _report(cfg, P, res), files=files if cfg.get("out") else None)
    return EXIT_OK


def tau_round_trip(P, n_points, seed, M=None, N=None, jitter=0.0, depth=60, tol=1e-6, region=None) -> dict:
    """Run ``tau(Phi(z))`` against ``P^M(z)`` on Julia-adjacent sample points."""
    if M is None:
        M, _ = estimate_M(P, collect_mirror_sources(P), max_k=30)
    N = max(M, 3) if N is None else N
    if M > N:
        raise InputError("M must not exceed the window length")
    rng = np.random.default_rng(seed)
    J = sample_julia(P, n_points, depth=max(depth, 20), seed=rng.integers(2**31))
    if jitter:
        J = J + jitter * np.sqrt(rng.uniform(size=J.size)) * np.exp(2j * np.pi * rng.uniform(size=J.size))
    errs, amb, nopre, esc = [], 0, 0, 0
    counts = {}
    for z in J:
        x = phi(P, complex(z), N)
        if not hasattr(x, "window"):
            esc += 1
            continue
        try:
            n_sols = len(preimage_windows(P, x, region, tol))
        except AmbiguousImage:
            n_sols = -1  # continuum of solutions
        counts[n_sols] = counts.get(n_sols, 0) + 1
        try:
            v = tau(P, x, M, region, tol)
        except AmbiguousImage:
            amb += 1
            continue
        except NoPreimage:
            nopre += 1
            continue
        _, orb = iterate(P, complex(z), M, escape_radius=math.inf)
        errs.append(abs(v - orb[-1]))
    return {
        "M": int(M),
        "N": int(N),
        "points": int(n_points),
        "max_error": max(errs) if errs else None,
        "ambiguous": amb,
        "no_preimage": nopre,
        "escaped": esc,
        # windows by number of points attaining them (-1: a continuum)
        "preimage_counts": {str(k): counts[k] for k in sorted(counts)},
    }


def cmd_tau(cfg) -> int:
    P = _polynomial(cfg)
    try:
        res = tau_round_trip(
            P,
            cfg.get("samples") or 100,
            cfg["seed"],
            M=cfg.get("M"),
            N=cfg.get("n_window"),
            jitter=cfg.get("jitter") or 0.0,
            depth=cfg["depth"],
            tol=cfg.get("tol") or 1e-6,
            region=cfg.get("region"),
        )
    except PolyreconError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    pio.validate(res, pio.TAU_SCHEMA)
    _emit(cfg, _report(cfg, P, res))
    if res["ambiguous"] > 0:
        sys.stderr.write(f"non-generic: {res['ambiguous']} ambiguous windows\n")
        return EXIT_NONGENERIC
    return EXIT_OK


def cmd_cantor(cfg) -> int:
    d, psi, c = int(cfg["d"]), float(cfg["psi"]), float(cfg["c"])
    name = "make_spec"
    try:
        spec = make_spec(d, psi, c)
        P = spec.polynomial()
        name = "modulus_identity"
        mod = modulus_identity_check(spec, seed=cfg["seed"])
        if not (mod.max_rel_error < 1e-12 and mod.lower_bound_ok):
            raise CertificateFailed("modulus identity")
        name = "escape"
        esc = escape_certificate(spec)
        name = "projection"
        gap = projection_disjointness(spec)
        name = "coding"
        rng = np.random.default_rng(cfg["seed"])
        diam = 0.0
        for _ in range(100):
            pre = [int(s) for s in rng.integers(0, d, 15)]
            pt = itinerary_to_point(P, spec, pre)
            diam = max(diam, pt.diameter)
            if point_to_itinerary(P, spec, pt, 15) != pre:
                raise CertificateFailed("itinerary round trip")
        name = "no_mirror"
        nm = no_mirror_certificate(P, spec, n_pairs=int(cfg["pairs"]), seed=cfg["seed"], escape=esc)
    except (CTooSmall, CertificateFailed) as exc:
        sys.stderr.write(f"certificate failed: {name}: {exc}\n")
        _emit(cfg, {"version": __version__, "config": _public_config(cfg), "failed": name, "message": str(exc)})
        return EXIT_CERT
    except PolyreconError as exc:
        sys.stderr.write(f"numerical failure: {name}: {exc}\n")
        return EXIT_NUMERIC
    res = {
        "spec": spec.to_json_obj(),
        "modulus": {"max_rel_error": mod.max_rel_error, "lower_bound_ok": mod.lower_bound_ok},
        "escape": esc.to_json_obj() | {"critical_escapes": esc.critical_escapes},
        "projection_gap": gap,
        "coding": {"round_trips": 100, "prefix_len": 15, "max_nest_diameter": diam},
        "no_mirror": nm.to_json_obj(),
    }
    pio.validate(res, pio.CERTIFICATE_SCHEMA)
    _emit(cfg, _report(cfg, P, res))
    return EXIT_OK


def cmd_julia(cfg) -> int:
    P = _polynomial(cfg)
    try:
        J = sample_julia(P, cfg.get("samples") or 10_000, cfg["depth"], seed=cfg["seed"])
    except PolyreconError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    text = pio.points_csv(J)
    out = cfg.get("out")
    if out:
        pio.write_text(Path(out) / "julia.csv", text)
        pio.write_text(Path(out) / "julia.json", pio.dumps_report(_report(cfg, P, {"points": int(J.size)})))
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "entropy": cmd_entropy,
    "mirrors": cmd_mirrors,
    "tau": cmd_tau,
    "cantor": cmd_cantor,
    "julia": cmd_julia,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg["command"]](cfg)
    except (InputError, ValueError) as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
