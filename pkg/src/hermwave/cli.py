"""Command-line front end: ``hermwave <command> [--config file.json] [flags]``.

Exit codes: 0 success, 2 configuration error, 3 numeric failure, 64 unknown command.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import filters, hermite, limit, mc, spectra, synth, transform

COMMANDS = ("synth", "spectrum", "filters-check", "coeffs", "scaling", "short-range",
            "limit-cov", "estimate")
OUT_ENV = "HERMWAVE_OUT"

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_USAGE = 0, 2, 3, 64

DEFAULTS = {
    "d": 0.35,
    "fstar": "farima",
    "G": "identity",
    "K": 0,
    "bank": "haar",
    "J": 10,
    "n": 2**17,
    "replicates": 100,
    "j_min": mc.DEFAULT_J_RANGE[0],
    "j_max": mc.DEFAULT_J_RANGE[1],
    "seed": 0,
    "replicate": 0,
    "q": 2,
    "grid": 2**16,
    "lags": [1, 2, 3, 4],
    "m_max": 3,
    "k_max": 3,
    "coeffs": None,
    "out": None,
}

# flags that are integers, floats or strings
_TYPES = {"d": float, "K": int, "J": int, "n": int, "replicates": int, "j_min": int,
          "j_max": int, "seed": int, "replicate": int, "q": int, "grid": int, "m_max": int,
          "k_max": int, "fstar": str, "G": str, "bank": str, "coeffs": str, "out": str}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class RunConfig:
    command: str
    d: float
    fstar: str
    G: str
    K: int
    bank: str
    J: int
    n: int
    replicates: int
    j_min: int
    j_max: int
    seed: int
    replicate: int
    q: int
    grid: int
    lags: list
    m_max: int
    k_max: int
    coeffs: str | None
    out: str
    provenance: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        out = asdict(self)
        out.pop("provenance")
        return out

    def record(self) -> dict:
        """Resolved values plus where each one came from."""
        return {"values": self.resolved(), "provenance": dict(self.provenance)}

    def header(self) -> str:
        return "config: " + json.dumps(self.resolved(), sort_keys=True)


def _load_file(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc.strerror}"])
    if not text.strip():
        raise ConfigError([f"config {path} is empty"])
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config {path} is not valid JSON: {exc.msg}"])
    if not isinstance(obj, dict):
        raise ConfigError([f"config {path} must hold a JSON object"])
    return obj


def validate_config(source, command: str = "scaling", overrides=None) -> RunConfig:
    """Resolve a config (path or dict) plus overrides against the defaults.

    Every violated precondition is collected and raised together as a
    :class:`ConfigError`.  ``provenance`` records where each value came from.
    """
    obj = {} if source is None else (_load_file(source) if isinstance(source, (str, os.PathLike))
                                     else dict(source))
    errors = [f"unknown config key {k!r}" for k in sorted(set(obj) - set(DEFAULTS))]
    values, prov = {}, {}
    for key, default in DEFAULTS.items():
        if overrides and overrides.get(key) is not None:
            values[key], prov[key] = overrides[key], "flag"
        elif key in obj:
            values[key], prov[key] = obj[key], "config"
        else:
            values[key], prov[key] = default, "default"
    if values["out"] is None:
        env = os.environ.get(OUT_ENV)
        values["out"], prov["out"] = (env, "env") if env else (".", "default")
    for key, typ in _TYPES.items():
        v = values[key]
        if v is None:
            continue
        try:
            values[key] = typ(v) if typ is not int or float(v) == int(v) else None
            if values[key] is None:
                raise ValueError
        except (TypeError, ValueError):
            errors.append(f"{key}={v!r} is not a valid {typ.__name__}")
    if errors:
        raise ConfigError(errors)
    errors += _check(command, values)
    if errors:
        raise ConfigError(errors)
    values["lags"] = [int(l) for l in values["lags"]]
    return RunConfig(command=command, provenance=prov, **values)


def _check(command, v):
    errs = []
    d = v["d"]
    if v["fstar"] not in ("farima", "white"):
        errs.append(f"fstar={v['fstar']!r} must be 'farima' or 'white'")
    if v["fstar"] == "white" and d != 0:
        errs.append("fstar='white' requires d=0")
    if not 0 <= d < 0.5:
        errs.append(f"d={d} violates 0<d<1/2 (spectra: memory parameter range)")
    try:
        hermite.builtin_filter(v["G"])
    except ValueError as exc:
        errs.append(str(exc))
    if v["K"] < 0:
        errs.append(f"K={v['K']} violates K >= 0")
    if v["bank"] not in filters.LOWPASS:
        errs.append(f"bank={v['bank']!r} must be one of {sorted(filters.LOWPASS)}")
    elif v["K"] >= 0:
        M = filters.vanishing_moments(filters.mirror_highpass(filters.LOWPASS[v["bank"]]))
        if v["K"] > M:
            errs.append(f"K={v['K']} exceeds the vanishing moments of {v['bank']} "
                        f"(M={M}); need M >= K for the K-fold factorization")
    if v["J"] < 1:
        errs.append(f"J={v['J']} violates J >= 1")
    if v["n"] < 2:
        errs.append(f"n={v['n']} violates n >= 2")
    if command in ("scaling", "short-range", "estimate"):
        if v["replicates"] < 2:
            errs.append(f"replicates={v['replicates']} violates replicates >= 2")
        if not 1 <= v["j_min"] < v["j_max"] <= v["J"]:
            errs.append(f"j range {v['j_min']}..{v['j_max']} must satisfy 1 <= j_min < j_max <= J")
        elif command == "estimate" and v["j_max"] < v["j_min"] + 2:
            errs.append("estimate needs at least 3 scales (j_max >= j_min + 2)")
        elif v["n"] // 2 ** v["j_max"] < mc.MIN_COEFFS:
            errs.append(f"n={v['n']} leaves fewer than {mc.MIN_COEFFS} coefficients at j={v['j_max']}")
    if not errs and command in ("scaling", "short-range", "limit-cov"):
        rank = _rank(v["G"]) if command != "limit-cov" else v["q"]
        qc = spectra.critical_order(d) if d > 0 else 0
        if command in ("scaling", "limit-cov") and (rank < 1 or rank > qc):
            errs.append(f"order q={rank} must satisfy 1 <= q < 1/(1-2d) (q_c={qc} for d={d})")
        if command == "short-range" and rank <= qc:
            errs.append(f"Hermite rank {rank} must exceed q_c={qc} for the short-range regime")
    if command == "spectrum" and v["q"] < 1:
        errs.append(f"q={v['q']} violates q >= 1")
    if command == "spectrum" and (v["grid"] < 64 or v["grid"] & (v["grid"] - 1)):
        errs.append(f"grid={v['grid']} must be a power of two >= 64")
    if any(int(l) < 0 for l in v["lags"]):
        errs.append("lags must be non-negative")
    return errs


def _rank(G):
    return hermite.hermite_coeffs(hermite.builtin_filter(G)).rank


def _model(rc: RunConfig):
    return spectra.white_noise() if rc.fstar == "white" or rc.d == 0 else spectra.farima(rc.d)


def _path_cfg(rc: RunConfig):
    return synth.PathConfig(_model(rc), hermite.builtin_filter(rc.G), rc.K, rc.n, rc.seed,
                            rc.replicate, rc.G)


def _bank(rc: RunConfig):
    return filters.build_mra_bank(rc.bank, rc.J, K=rc.K)


def _path(rc, name):
    os.makedirs(rc.out, exist_ok=True)
    return os.path.join(rc.out, name)


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1, default=_plain)
        fh.write("\n")


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj).__name__)


def cmd_synth(rc):
    x, y = synth.sample_path(_path_cfg(rc))
    path = _path(rc, "series.csv")
    synth.write_series_csv(path, x, y, [rc.header()])
    return {"artifacts": [path], "n": rc.n, "x_var": float(x.var()), "y_last": float(y[-1])}


def cmd_spectrum(rc):
    model = _model(rc)
    grid = spectra.self_convolve(model, rc.q, rc.grid)
    lam, val = grid.lam, grid.values
    beta = grid.beta
    pos = lam > 0
    path = _path(rc, "spectrum.csv")
    with open(path, "w", newline="") as fh:
        fh.write(f"# {rc.header()}\n")
        fh.write(f"# singular_exponent: {beta!r}\n")
        wr = csv.writer(fh)
        wr.writerow(["lambda", "value", "scaled"])
        for l, f in zip(lam[pos], val[pos]):
            wr.writerow([repr(float(l)), repr(float(f)), repr(float(f * l**beta))])
    band = (lam >= 1e-3) & (lam <= 1e-2)
    scaled = val[band] * lam[band] ** beta
    return {"artifacts": [path], "q": rc.q, "singular_exponent": beta,
            "scaled_band_variation": float(scaled.max() / scaled.min() - 1) if band.any() else None}


def cmd_filters_check(rc):
    bank = _bank(rc)
    C = filters.check_uniform_smoothness(bank)
    lam = np.linspace(-32, 32, 2049)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", filters.FilterConvergenceWarning)
        disc, casc = filters.limit_transfer(bank, lam)
    bank_path, tr_path, js_path = _path(rc, "bank.txt"), _path(rc, "transfer.csv"), _path(rc, "filters.json")
    filters.write_bank(bank, bank_path, [rc.header()])
    filters.write_transfer_csv(bank, tr_path, header=[rc.header()])
    summary = {"config": rc.record(), "M": bank.M, "K": bank.K, "alpha": bank.alpha,
               "C_hat": C, "supports": [bank.support(j) for j in range(1, bank.J + 1)],
               "limit_transfer_sup_diff": float(np.abs(disc - casc).max())}
    _write_json(js_path, summary)
    return {"artifacts": [bank_path, tr_path, js_path], "M": bank.M, "C_hat": C}


def cmd_coeffs(rc):
    bank = _bank(rc)
    _, y = synth.sample_path(_path_cfg(rc))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", transform.EmptyLevelWarning)
        cm = transform.coeffs_from_path(bank, y)
    path = _path(rc, "coeffs.csv")
    cm.to_csv(path, [rc.header()])
    spath = _path(rc, "coeffs_summary.json")
    _write_json(spath, {"config": rc.record(), "levels": cm.summary()})
    return {"artifacts": [path, spath], "levels": len(cm.scales)}


def _scaling_like(rc, fn, stem):
    bank = _bank(rc)
    rep = fn(_path_cfg(rc), bank, range(rc.j_min, rc.j_max + 1), rc.replicates)
    jpath, cpath = _path(rc, f"{stem}.json"), _path(rc, f"{stem}.csv")
    obj = rep.to_dict()
    obj["config"] = rc.record()
    _write_json(jpath, obj)
    rep.to_csv(cpath, [rc.header()])
    return {"artifacts": [jpath, cpath], "slope": rep.slope, "slope_ci": list(rep.slope_ci),
            "target": rep.target, "contains_target": rep.contains_target}


def cmd_scaling(rc):
    return _scaling_like(rc, mc.scaling_experiment, "scaling")


def cmd_short_range(rc):
    return _scaling_like(rc, mc.short_range_experiment, "short_range")


def cmd_limit_cov(rc):
    bank = _bank(rc)
    spec = limit.LimitSpec.from_bank(bank, rc.q, rc.d, rc.K)
    index = [(m, k) for m in range(rc.m_max + 1) for k in range(rc.k_max + 1)]
    block = limit.limit_cov_block(spec, index)
    path = _path(rc, "limit_cov.csv")
    block.to_csv(path, [rc.header()])
    return {"artifacts": [path], "size": len(index), "H": spec.H,
            "min_eigenvalue": block.min_eigenvalue(), "max_err": float(block.err.max())}


def _read_coeffs_csv(path):
    levels = {}
    with open(path) as fh:
        rows = csv.DictReader(ln for ln in fh if not ln.startswith("#"))
        for row in rows:
            levels.setdefault(int(row["j"]), ([], []))
            levels[int(row["j"])][0].append(int(row["k"]))
            levels[int(row["j"])][1].append(float(row["w"]))
    return transform.CoeffMatrix({j: (np.array(k), np.array(w)) for j, (k, w) in levels.items()},
                                 {j: 2**j for j in levels})


def cmd_estimate(rc):
    js = range(rc.j_min, rc.j_max + 1)
    if rc.coeffs:
        coeffs = _read_coeffs_csv(rc.coeffs)
    else:
        _, coeffs = mc.collect_moments(_path_cfg(rc), _bank(rc), js, rc.replicates, keep=set(js))
    est, ci = mc.estimate_memory(coeffs, rc.j_min, rc.j_max, seed=rc.seed)
    path = _path(rc, "estimate.json")
    _write_json(path, {"config": rc.record(), "estimate": est, "ci": list(ci),
                       "estimand": "d(q0)+K"})
    return {"artifacts": [path], "estimate": est, "ci": list(ci)}


HANDLERS = {"synth": cmd_synth, "spectrum": cmd_spectrum, "filters-check": cmd_filters_check,
            "coeffs": cmd_coeffs, "scaling": cmd_scaling, "short-range": cmd_short_range,
            "limit-cov": cmd_limit_cov, "estimate": cmd_estimate}


def _parser():
    p = argparse.ArgumentParser(prog="hermwave", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON run configuration")
        for key, typ in _TYPES.items():
            sp.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None)
        sp.add_argument("--lags", type=lambda s: [int(x) for x in s.split(",")], default=None,
                        help="comma-separated lags")
    return p


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _parser()
    if not argv or (argv[0] not in COMMANDS and argv[0] not in ("-h", "--help")):
        parser.print_usage(sys.stderr)
        if argv:
            print(f"hermwave: unknown command {argv[0]!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        rc = validate_config(args.config, args.command, overrides)
    except ConfigError as exc:
        print(json.dumps({"status": "config-error", "errors": exc.errors}))
        return EXIT_CONFIG
    try:
        summary = HANDLERS[rc.command](rc)
    except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(json.dumps({"status": "numeric-failure", "command": rc.command,
                          "error": f"{type(exc).__name__}: {exc}"}))
        return EXIT_NUMERIC
    out = {"status": "ok", "command": rc.command, "seed": rc.seed}
    out.update(summary)
    print(json.dumps(out, sort_keys=True, default=_plain))
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
