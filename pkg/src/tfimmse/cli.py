"""Command-line driver: ``tfimmse {wd,sampling,immse,tfimmse,validate}``.

Every run writes its data files plus ``manifest.json`` into the output
directory. The manifest holds the resolved config, so
``tfimmse <cmd> --config out/manifest.json`` reruns the same experiment and
reproduces the data files byte for byte.

Exit codes: 0 success, 2 config or usage error, 3 property or acceptance
failure (warnings only under ``--mode explore``).
"""

from __future__ import annotations

import argparse
import copy
import datetime
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, checks, io, svg
from .errors import TfImmseError, UsageError
from .estimation import ConditionalEstimator, immse_sweep
from .sampling import (SamplingFilter, SamplingSpec, conditional_psd, min_alias_terms, mmse_freq,
                       reconstruction_energy)
from .signals import SourceModel, SpectralDensity, analytic_signal, realize
from .tf_immse import reduce_independent, tf_immse_derivative
from .tfa import wd_property_residuals, wigner

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("tfimmse")

EXIT_OK, EXIT_USAGE, EXIT_PROPERTY = 0, 2, 3

COMMON = {"seed": 0, "out": None, "format": "all", "mode": "accept"}

DEFAULTS = {
    "wd": {"n": 256, "sample_rate": 1.0, "analytic": True, "circular": False,
           "signal": {"kind": "chirp", "f_start": 0.05, "f_end": 0.2, "real": True}},
    "sampling": {"n": 256, "sample_rate": 1.0, "psd": {"shape": "triangle", "band": 0.125},
                 "noise_level": 0.0, "fs_sub": [0.0625, 0.125, 0.25], "filter": {"kind": "ideal_lowpass"},
                 "alias_terms": None},
    "immse": {"prior": {"kind": "gaussian"}, "field": "real", "n_inputs": 2, "rho": 0.0,
              "snr_grid": [0.5, 1.0, 1.5], "n_samples": 100_000, "mi_method": None,
              "mmse_method": "monte_carlo", "delta": None, "tolerance": 2e-3},
    "tfimmse": {"x1": {"kind": "gaussian", "real": True}, "x2": {"kind": "gaussian", "real": True},
                "rho": 0.0, "snr": 1.0, "n": 256, "n_realizations": 500, "sample_rate": 1.0,
                "analytic": False, "sampling": None, "variant": "squared", "reduce": "none",
                "n_resamples": 200, "n_blocks": 20, "comparison_samples": 100_000},
    "validate": {},
}


class ConfigError(UsageError):
    pass


# -- config --------------------------------------------------------------------


def load_config(path: str) -> dict:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        if p.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("config must be a table")
    # a manifest carries the resolved config under "config"
    if "config" in data and "command" in data:
        data = data["config"]
    return data


def resolve_config(command: str, user: dict, args: argparse.Namespace) -> dict:
    cfg = copy.deepcopy(COMMON)
    cfg.update(copy.deepcopy(DEFAULTS[command]))
    unknown = set(user) - set(cfg)
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
    cfg.update(user)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    if args.format is not None:
        cfg["format"] = args.format
    if args.mode is not None:
        cfg["mode"] = args.mode
    if args.no_analytic and "analytic" in cfg:
        cfg["analytic"] = False
    if args.variant is not None and "variant" in cfg:
        cfg["variant"] = args.variant
    if args.reduce is not None and "reduce" in cfg:
        cfg["reduce"] = args.reduce
    if cfg["out"] is None:
        cfg["out"] = str(Path("out") / command)
    if cfg["format"] not in ("csv", "json", "svg", "all"):
        raise ConfigError("format must be csv, json, svg or all")
    if cfg["mode"] not in ("accept", "explore"):
        raise ConfigError("mode must be accept or explore")
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    return cfg


def build_model(spec: dict, n: int, fs: float) -> SourceModel:
    """Source model from a config table."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("source model needs a 'kind'")
    kind = spec["kind"]
    real = bool(spec.get("real", False))
    if kind == "gaussian":
        shape = spec.get("psd", "white")
        if shape == "white":
            psd = None
        elif shape == "lowpass":
            psd = SpectralDensity.lowpass(n, fs, spec["band"], 1.0)
        elif shape == "triangle":
            psd = SpectralDensity.triangle(n, fs, spec["band"])
        else:
            raise ConfigError(f"unknown psd shape {shape!r}")
        return SourceModel.gaussian(psd, real=real)
    if kind == "zero":
        return SourceModel.gaussian(SpectralDensity.on_dft_grid(n, fs, np.zeros(n)), real=real)
    if kind == "chirp":
        return SourceModel.chirp(spec["f_start"], spec["f_end"], spec.get("amplitude", 1.0), real)
    if kind == "tone":
        f = spec["freq"]
        return SourceModel.chirp(f, f, spec.get("amplitude", 1.0), real)
    if kind == "bpsk":
        return SourceModel.bpsk()
    if kind == "qpsk":
        return SourceModel.qpsk()
    if kind == "alphabet":
        atoms = [complex(a[0], a[1]) if isinstance(a, (list, tuple)) else complex(a) for a in spec["atoms"]]
        return SourceModel.discrete(atoms, spec.get("probs"))
    raise ConfigError(f"unknown source kind {kind!r}")


# -- output --------------------------------------------------------------------


class Outputs:
    def __init__(self, cfg: dict):
        self.dir = Path(cfg["out"])
        self.fmt = cfg["format"]
        self.files = []

    def wants(self, kind: str) -> bool:
        return self.fmt in (kind, "all")

    def write(self, name: str, text: str, kind: Optional[str] = None) -> None:
        kind = kind or name.rsplit(".", 1)[-1]
        if kind in ("csv", "json", "svg") and not self.wants(kind):
            return
        io.write_text(self.dir / name, text)
        self.files.append(name)

    def manifest(self, command: str, cfg: dict, status: dict) -> None:
        m = {"command": command, "config": cfg, "version": __version__,
             "run_time": datetime.datetime.now(datetime.timezone.utc).isoformat(),
             "outputs": sorted(self.files), "status": status}
        io.write_text(self.dir / "manifest.json", io.dumps_json(m))


def _fail(cfg: dict, msg: str) -> int:
    if cfg["mode"] == "accept":
        log.error(msg)
        return EXIT_PROPERTY
    log.warning(msg)
    return EXIT_OK


# -- commands ------------------------------------------------------------------


def cmd_wd(cfg: dict) -> int:
    n, fs = int(cfg["n"]), float(cfg["sample_rate"])
    x = realize(build_model(cfg["signal"], n, fs), n, fs, cfg["seed"])
    if cfg["analytic"]:
        x = analytic_signal(x)
    w = wigner(x, circular=bool(cfg["circular"]))
    res = wd_property_residuals(x, w)
    out = Outputs(cfg)
    out.write("wd.csv", io.tfdist_to_csv(w))
    out.write("wd.json", io.tfdist_to_json(w))
    out.write("wd.svg", svg.heatmap(w.real, w.time_axis, w.freq_axis, "Wigner distribution"))
    ok = cfg["circular"] or all(v <= checks.TOL for v in res.values())
    summary = {"residuals": res, "tolerance": checks.TOL, "passed": bool(ok)}
    out.write("summary.json", io.dumps_json(summary), "json")
    out.manifest("wd", cfg, summary)
    return EXIT_OK if ok else _fail(cfg, f"WD property check failed: {res}")


def _sampling_spec(entry, cfg: dict, band: float) -> SamplingSpec:
    if isinstance(entry, dict):
        fs_sub = float(entry["fs_sub"])
        fcfg = {**cfg["filter"], **{k: v for k, v in entry.items() if k != "fs_sub"}}
    else:
        fs_sub = float(entry)
        fcfg = dict(cfg["filter"])
    kind = fcfg.get("kind", "ideal_lowpass")
    gain = float(fcfg.get("gain", 1.0))
    if kind == "ideal_lowpass":
        cutoff = fcfg.get("cutoff")
        filt = SamplingFilter(kind, cutoff=fs_sub / 2 if cutoff is None else float(cutoff), gain=gain)
    elif kind == "flat":
        filt = SamplingFilter("flat", gain=gain)
    else:
        raise ConfigError("sampling filter kind must be ideal_lowpass or flat")
    k = cfg["alias_terms"]
    if k is None:
        k = max(1, min_alias_terms(fs_sub, filt, band))
    return SamplingSpec(fs_sub, filt, int(k), band)


def cmd_sampling(cfg: dict) -> int:
    n, fs = int(cfg["n"]), float(cfg["sample_rate"])
    p = cfg["psd"]
    shape = p.get("shape", "triangle")
    if shape == "triangle":
        sx = SpectralDensity.triangle(n, fs, p["band"], p.get("peak", 1.0))
    elif shape == "lowpass":
        sx = SpectralDensity.lowpass(n, fs, p["band"], p.get("level", 1.0))
    elif shape == "flat":
        sx = SpectralDensity.on_dft_grid(n, fs, np.full(n, p.get("level", 1.0)))
    else:
        raise ConfigError(f"unknown psd shape {shape!r}")
    noise = SpectralDensity.on_dft_grid(n, fs, np.full(n, float(cfg["noise_level"])))
    rows = []
    for entry in cfg["fs_sub"]:
        spec = _sampling_spec(entry, cfg, fs / 2)
        c = conditional_psd(sx, noise, spec)
        rows.append({"fs_sub": spec.fs_sub, "mmse": mmse_freq(sx, c, spec),
                     "recon_energy": reconstruction_energy(c, spec), "total_power": sx.total_power(),
                     "filter": spec.to_dict()["filter"], "alias_terms": spec.alias_terms})
    out = Outputs(cfg)
    out.write("sampling.csv", io._csv_text(["fs_sub", "mmse", "recon_energy", "total_power"],
                                           ([io._f(r["fs_sub"]), io._f(r["mmse"]), io._f(r["recon_energy"]),
                                             io._f(r["total_power"])] for r in rows)))
    out.write("sampling.json", io.dumps_json({"rows": rows}))
    out.write("sampling.svg", svg.line_plot([r["fs_sub"] for r in rows],
                                            [[r["mmse"] for r in rows], [r["recon_energy"] for r in rows]],
                                            ["mmse", "reconstruction energy"], "Sub-Nyquist sampling loss",
                                            "fs_sub", "power"))
    # mmse must not increase with the rate across ideal-filter rows at their default cutoff
    ideal = [r for r, e in zip(rows, cfg["fs_sub"]) if not isinstance(e, dict)
             and cfg["filter"].get("kind", "ideal_lowpass") == "ideal_lowpass" and cfg["filter"].get("cutoff") is None]
    ideal.sort(key=lambda r: r["fs_sub"])
    ok = all(b["mmse"] <= a["mmse"] + 1e-12 for a, b in zip(ideal, ideal[1:]))
    status = {"passed": bool(ok), "check": "mmse non-increasing in fs_sub"}
    out.manifest("sampling", cfg, status)
    return EXIT_OK if ok else _fail(cfg, "mmse increased with the sampling rate")


def _prior(spec: dict) -> SourceModel:
    kind = spec.get("kind")
    if kind == "gaussian":
        return SourceModel.gaussian()
    return build_model(spec, 2, 1.0)


def cmd_immse(cfg: dict) -> int:
    if len(cfg["snr_grid"]) < 3:
        raise UsageError("snr_grid needs at least 3 points")
    est = ConditionalEstimator(_prior(cfg["prior"]), 1.0, cfg["field"], int(cfg["n_inputs"]), float(cfg["rho"]))
    rep = immse_sweep(est, cfg["snr_grid"], int(cfg["n_samples"]), cfg["seed"], cfg["mi_method"],
                      cfg["mmse_method"], cfg["delta"])
    out = Outputs(cfg)
    out.write("immse.csv", io.immse_report_to_csv(rep))
    out.write("immse.json", io.immse_report_to_json(rep))
    out.write("immse.svg", svg.line_plot(rep.snr_grid, [rep.dmi_dsnr, rep.rhs()],
                                         ["dI/dsnr", "c (sum mmse + psi)"], "I-MMSE identity", "snr", "nats"))
    tol = float(cfg["tolerance"])
    viol = rep.max_violation(tol)
    status = {"passed": bool(viol <= 0), "tolerance": tol, "max_abs_residual": float(np.max(np.abs(rep.residual)))}
    out.manifest("immse", cfg, status)
    return EXIT_OK if viol <= 0 else _fail(cfg, f"I-MMSE residual exceeds {tol} + 3 stderr")


def _comparison(cfg: dict, m1: SourceModel, m2: SourceModel) -> dict:
    """Scalar I-MMSE derivative at the same snr, for the gap row."""
    snr = float(cfg["snr"])
    if m1.kind == "chirp" or m2.kind == "chirp":
        return {"available": False, "reason": "deterministic inputs have no scalar prior"}
    if m2.is_silent:
        n_in = 1
    elif m1.kind == m2.kind and (m1.kind == "gaussian_psd" or np.array_equal(m1.atoms, m2.atoms)):
        n_in = 2
    else:
        return {"available": False, "reason": "inputs do not share one prior"}
    field = "real" if (m1.real and m2.real) else "complex_circular"
    prior = SourceModel.gaussian() if m1.kind == "gaussian_psd" else m1
    est = ConditionalEstimator(prior, snr, field, n_in, float(cfg["rho"]) if n_in == 2 else 0.0)
    method = "closed_form" if est.gaussian else "monte_carlo"
    rep = immse_sweep(est, [snr / 2, snr, 1.5 * snr], int(cfg["comparison_samples"]), cfg["seed"],
                      mmse_method=method)
    return {"available": True, "scalar_dmi_dsnr": float(rep.dmi_dsnr[1]), "field_convention": field}


def cmd_tfimmse(cfg: dict) -> int:
    n, fs = int(cfg["n"]), float(cfg["sample_rate"])
    m1, m2 = build_model(cfg["x1"], n, fs), build_model(cfg["x2"], n, fs)
    spec = None
    if cfg["sampling"] is not None:
        s = cfg["sampling"]
        spec = SamplingSpec.ideal(float(s.get("fs_sub", fs)), s.get("cutoff"), None, s.get("alias_terms"))
    value, rep = tf_immse_derivative([m1, m2], spec, float(cfg["snr"]), int(cfg["n_realizations"]), cfg["seed"],
                                     cfg["variant"], cfg["reduce"], n, float(cfg["rho"]), fs, bool(cfg["analytic"]),
                                     int(cfg["n_resamples"]), int(cfg["n_blocks"]))
    comp = _comparison(cfg, m1, m2)
    if comp["available"]:
        comp["tf_value"] = value
        comp["gap"] = value - comp["scalar_dmi_dsnr"]
    out = Outputs(cfg)
    body = rep.to_dict()
    body["comparison"] = comp
    out.write("tfimmse.json", io.dumps_json(body))
    out.write("tfimmse.csv", io.tf_report_to_csv(rep))
    out.write("comparison.csv", io._csv_text(["tf_value", "scalar_dmi_dsnr", "gap"],
                                             [[io._f(value), io._f(comp.get("scalar_dmi_dsnr", np.nan)),
                                               io._f(comp.get("gap", np.nan))]]))
    se = rep.bootstrap["term_stderr"] if rep.bootstrap else None
    out.write("tfimmse.svg", svg.signed_bars([str(t.index) for t in rep.terms], [t.signed.real for t in rep.terms],
                                             se, "Signed term values"))

    status = {"reduction": rep.reduction, "passed": True}
    if rep.reduction == "real":
        rel = abs(rep.reduced_total - rep.total) / max(abs(rep.total), 1e-300)
        status.update(regrouping_rel=rel, passed=bool(rel <= 1e-9))
    elif rep.reduction == "independent" and rep.bootstrap:
        gap = abs(rep.reduced_total - rep.total)
        bound = 3 * rep.bootstrap["independent_gap_stderr"]
        status.update(independent_gap=gap, bound=bound, passed=bool(gap <= bound))
    elif rep.bootstrap:
        red = reduce_independent(rep)
        status["independent_gap"] = abs(red.reduced_total - rep.total)
        status["independent_gap_stderr"] = rep.bootstrap["independent_gap_stderr"]
    out.manifest("tfimmse", cfg, status)
    return EXIT_OK if status["passed"] else _fail(cfg, f"TF-I-MMSE check failed: {status}")


def cmd_validate(cfg: dict) -> int:
    results = checks.run_all(cfg["seed"])
    out = Outputs(cfg)
    body = {"checks": [{"name": n, "passed": bool(p), "detail": d} for n, p, d in results]}
    out.write("validate.json", io.dumps_json(body))
    for name, passed, _ in results:
        print(f"{'PASS' if passed else 'FAIL'}  {name}")
    ok = all(p for _, p, _ in results)
    out.manifest("validate", cfg, {"passed": ok})
    return EXIT_OK if ok else _fail(cfg, "validation suite failed")


COMMANDS = {"wd": cmd_wd, "sampling": cmd_sampling, "immse": cmd_immse, "tfimmse": cmd_tfimmse,
            "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tfimmse", description="Time-frequency I-MMSE experiments.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML or JSON config (a manifest.json also works)")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("csv", "json", "svg", "all"))
        p.add_argument("--mode", choices=("accept", "explore"))
        p.add_argument("--no-analytic", action="store_true", help="skip analytic-signal preprocessing")
        p.add_argument("--variant", choices=("literal", "squared"))
        p.add_argument("--reduce", choices=("none", "real", "independent"))
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        user = load_config(args.config) if args.config else {}
        cfg = resolve_config(args.command, user, args)
        return COMMANDS[args.command](cfg)
    except (TfImmseError, KeyError, TypeError, ValueError) as e:
        msg = f"missing config key {e}" if isinstance(e, KeyError) else str(e)
        print(f"tfimmse {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
