"""Experiment runner: presets, config parsing, CSV/JSON artifact output.

CSV schemas:

* psd.csv   — sweep_value, k_centered, freq_norm, desired_db, dist_mc_db,
              dist_analytic_db, dist_iso_db   (one block per sweep value)
* evm.csv   — sweep_value, evm_mc_db, evm_analytic_db, evm_iso_db, stderr_db

All internal math is linear power; dB conversion happens only here, at the
emission boundary.  Writes are temp-then-rename so a crash never leaves a
partial artifact.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from . import analytic, mc
from .core import ConfigError, LinkConfig, centered_bins
from .pa import PaParams

ENV_PREFIX = "MIMODIST_"


@dataclass
class ExperimentSpec:
    name: str
    base: LinkConfig
    sweep_axis: str
    sweep_values: tuple
    out_dir: str = "out"
    emit_psd: bool = True
    emit_evm: bool = True
    threads: int = 1


def _base(M=100, Ns=1024, mu=4, L=20, tau_max=100, trials=200, seed=1):
    return LinkConfig(M=M, Ns=Ns, mu=mu, L=L, tau_max=tau_max,
                      qam_order=64, pa=PaParams(nu=1.0, r_o=1.0, p=2.0),
                      ibo_db=8.0, trials=trials, seed=seed)


def presets():
    """Built-in experiment definitions (full-scale figure reproductions
    plus a fast smoke-test instance)."""
    return {
        "fig1a": ExperimentSpec("fig1a", _base(), "L", (1, 5, 20)),
        "fig1b": ExperimentSpec("fig1b", _base(), "tau_max", (4, 20, 100, 400)),
        "fig2a": ExperimentSpec("fig2a", _base(), "L", (1, 2, 5, 10, 20)),
        "fig2b": ExperimentSpec("fig2b", _base(), "tau_max", (4, 20, 100, 400)),
        "small": ExperimentSpec("small",
                                _base(M=16, Ns=64, mu=2, L=4, tau_max=16,
                                      trials=20),
                                "L", (1, 4)),
    }


def validate(spec: ExperimentSpec):
    """Every constraint violation as a diagnostic string; empty when valid."""
    issues = list(spec.base.diagnostics())
    if spec.sweep_axis not in ("L", "tau_max", "M"):
        issues.append("sweep axis must be one of L, tau_max, M")
    if not spec.sweep_values:
        issues.append("sweep values must be nonempty")
    elif any(int(v) < 1 for v in spec.sweep_values):
        issues.append("sweep values must be positive")
    if spec.threads < 1:
        issues.append("threads must be >= 1")
    return issues


def _parse_config_text(text):
    """Flat key=value lines or a JSON object; returns a dict."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return json.loads(text)
    out = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"bad config line: {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key] = val
    return out


_INT_KEYS = {"M", "Ns", "mu", "L", "tau_max", "qam_order", "trials",
             "seed", "threads"}
_FLOAT_KEYS = {"ibo_db", "pa_nu", "pa_r_o", "pa_p"}
# Environment variables arrive upper-cased; map case-insensitively onto
# the canonical key spelling.
_CANONICAL = {k.lower(): k for k in _INT_KEYS | _FLOAT_KEYS
              | {"sweep_axis", "sweep_values", "out", "out_dir"}}


def _apply_overrides(spec: ExperimentSpec, overrides: dict) -> ExperimentSpec:
    base_kw = {}
    pa_kw = {}
    for key, val in overrides.items():
        key = _CANONICAL.get(key.lower(), key)
        if key in ("sweep_axis",):
            spec = dataclasses.replace(spec, sweep_axis=str(val))
        elif key == "sweep_values":
            vals = val if isinstance(val, (list, tuple)) else \
                [v for v in str(val).replace(",", " ").split()]
            spec = dataclasses.replace(spec, sweep_values=tuple(int(v) for v in vals))
        elif key == "threads":
            spec = dataclasses.replace(spec, threads=int(val))
        elif key in ("out", "out_dir"):
            spec = dataclasses.replace(spec, out_dir=str(val))
        elif key.startswith("pa_"):
            pa_kw[key[3:]] = float(val)
        elif key in _INT_KEYS:
            base_kw[key] = int(val)
        elif key in _FLOAT_KEYS:
            base_kw[key] = float(val)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    pa = dataclasses.replace(spec.base.pa, **pa_kw) if pa_kw else spec.base.pa
    return dataclasses.replace(
        spec, base=dataclasses.replace(spec.base, pa=pa, **base_kw))


def _env_overrides():
    out = {}
    for key, val in os.environ.items():
        if key.startswith(ENV_PREFIX):
            out[key[len(ENV_PREFIX):].lower()] = val
    return out


def _db(x, floor=1e-300):
    return 10.0 * np.log10(np.maximum(np.asarray(x, dtype=float), floor))


def _atomic_write(path, write_fn):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)),
                               suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_psd_csv(path, result: "mc.SweepResult"):
    def write(fh):
        w = csv.writer(fh)
        w.writerow(["sweep_value", "k_centered", "freq_norm", "desired_db",
                    "dist_mc_db", "dist_analytic_db", "dist_iso_db"])
        for pt in result.points:
            n_fft, ns = pt.cfg.N, pt.cfg.Ns
            k = centered_bins(n_fft)
            order = np.argsort(k)
            rows = zip(k[order],
                       2.0 * k[order] / ns,                     # 1 = band edge
                       _db(pt.mc.psd_desired.bins[order]),
                       _db(pt.mc.psd_distortion.bins[order]),
                       _db(pt.dist_analytic.bins[order]),
                       _db(pt.dist_isotropic.bins[order]))
            for kk, fn, de, dm, da, di in rows:
                w.writerow([pt.value, int(kk), f"{fn:.6f}", f"{de:.6f}",
                            f"{dm:.6f}", f"{da:.6f}", f"{di:.6f}"])
    _atomic_write(path, write)


def _write_evm_csv(path, result: "mc.SweepResult"):
    def write(fh):
        w = csv.writer(fh)
        w.writerow(["sweep_value", "evm_mc_db", "evm_analytic_db",
                    "evm_iso_db", "stderr_db"])
        for value, mc_p, an_p, iso_p, stderr in result.evm_table():
            # stderr in dB of the power estimate: 10 log10(e) * rel. error
            rel = stderr / mc_p if mc_p > 0 else float("nan")
            w.writerow([value, f"{_db(mc_p):.6f}", f"{_db(an_p):.6f}",
                        f"{_db(iso_p):.6f}",
                        f"{10.0 * np.log10(np.e) * rel:.6f}"])
    _atomic_write(path, write)


def _config_hash(spec: ExperimentSpec):
    doc = {"base": dataclasses.asdict(spec.base),
           "sweep_axis": spec.sweep_axis,
           "sweep_values": list(spec.sweep_values)}
    return hashlib.sha256(
        json.dumps(doc, sort_keys=True).encode()).hexdigest()


def run(spec: ExperimentSpec):
    """Execute a spec; returns 0 on success and writes artifacts to out_dir."""
    issues = validate(spec)
    if issues:
        for issue in issues:
            print(f"error: {issue}", file=sys.stderr)
        return 2
    t0 = time.time()
    result = mc.sweep(spec.base, spec.sweep_axis, spec.sweep_values,
                      threads=spec.threads)
    runtime = time.time() - t0
    os.makedirs(spec.out_dir, exist_ok=True)
    if spec.emit_psd:
        _write_psd_csv(os.path.join(spec.out_dir, "psd.csv"), result)
    if spec.emit_evm:
        _write_evm_csv(os.path.join(spec.out_dir, "evm.csv"), result)
    meta = {
        "name": spec.name,
        "config_sha256": _config_hash(spec),
        "seed": spec.base.seed,
        "trials": spec.base.trials,
        "sweep_axis": spec.sweep_axis,
        "sweep_values": list(spec.sweep_values),
        "hermite_models": {
            str(pt.value): json.loads(pt.model.to_json())
            for pt in result.points},
        "runtime_seconds": round(runtime, 3),
    }
    _atomic_write(os.path.join(spec.out_dir, "metadata.json"),
                  lambda fh: json.dump(meta, fh, indent=2, sort_keys=True))
    print(f"wrote {spec.out_dir}/psd.csv, evm.csv, metadata.json "
          f"({runtime:.1f}s)")
    return 0


def selftest():
    """Small-instance oracle suite (Ns=64); prints pass/fail per check."""
    ok = True

    def report(name, passed, detail=""):
        nonlocal ok
        ok = ok and passed
        print(f"[{'PASS' if passed else 'FAIL'}] {name} {detail}")

    # xi_sq vs brute-force sum
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(10):
        n_fft, tm = 128, int(rng.integers(1, 40))
        d = int(rng.integers(-n_fft, n_fft))
        brute = abs(np.exp(-2j * np.pi * d * np.arange(tm) / n_fft).sum()
                    / tm) ** 2
        worst = max(worst, abs(analytic.xi_sq(d, tm, n_fft) - brute))
    report("xi_sq brute-force", worst < 1e-12, f"max err {worst:.2e}")

    # fast vs direct pair sums
    n_fft, ns = 128, 64
    delays = np.array([3, 11, 11, 40])
    fast = analytic.distortion_psd_conditional(delays, 4, 64, n_fft, ns, 2,
                                               0.1, method="fast").bins
    direct = analytic.distortion_psd_conditional(delays, 4, 64, n_fft, ns, 2,
                                                 0.1, method="direct").bins
    err = np.max(np.abs(fast - direct) / np.max(direct))
    report("fast-vs-direct pair sum", err < 1e-9, f"max rel err {err:.2e}")

    # exact average vs conditional Monte Carlo
    rng = np.random.default_rng(1)
    L, tm = 4, 16
    acc = np.zeros(n_fft)
    draws = 400
    for _ in range(draws):
        acc += analytic.distortion_psd_conditional(
            rng.integers(0, tm, L), L, tm, n_fft, ns, 1, 1.0).bins
    acc /= draws
    avg = analytic.distortion_psd_avg(L, tm, n_fft, ns, 1, 1.0).bins
    gap = abs(acc.mean() / avg.mean() - 1.0)
    report("avg-vs-conditional", gap < 0.1, f"mean gap {gap:.3f}")
    return 0 if ok else 1


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="mimodist",
        description="PA-distortion experiments for massive-MIMO OFDM downlinks")
    parser.add_argument("--preset", choices=sorted(presets()),
                        help="built-in experiment")
    parser.add_argument("--config", help="key=value or JSON config file")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--selftest", action="store_true",
                        help="run the small-instance oracle suite and exit")
    parser.add_argument("--validate-only", action="store_true",
                        help="print diagnostics without running")
    args = parser.parse_args(argv)

    if args.selftest:
        return selftest()
    if not args.preset and not args.config:
        parser.error("one of --preset/--config (or --selftest) is required")

    spec = presets()[args.preset] if args.preset else \
        ExperimentSpec("custom", _base(), "L", (1,))
    try:
        if args.config:
            with open(args.config) as fh:
                spec = _apply_overrides(spec, _parse_config_text(fh.read()))
        spec = _apply_overrides(spec, _env_overrides())
        cli_overrides = {}
        if args.seed is not None:
            cli_overrides["seed"] = args.seed
        if args.trials is not None:
            cli_overrides["trials"] = args.trials
        if args.threads is not None:
            cli_overrides["threads"] = args.threads
        if args.out is not None:
            cli_overrides["out"] = args.out
        spec = _apply_overrides(spec, cli_overrides)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.validate_only:
        issues = validate(spec)
        for issue in issues:
            print(issue)
        return 0 if not issues else 2
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
