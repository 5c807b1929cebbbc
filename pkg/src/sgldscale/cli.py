"""Command-line experiment driver.

    sgldscale <simulate|compare|rate-study|ou-verify|metrics|bounds|var-avg>
              --config FILE --out DIR [--seed U64] [--threads K]

Every run writes ``manifest.txt`` into the output directory. The manifest is
itself a valid config file (derived quantities appear as comments), so
``--config DIR/manifest.txt`` reproduces the CSV outputs byte for byte.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import bounds as bd
from . import rng as rngmod
from .data import SynthSpec, synth_data
from .functionals import (G1_NORM, G2_NORM, bounded_wasserstein_lower, functional_gap, g1, g2, levy_prokhorov_estimate,
                          parse_dictionary)
from .io import ConfigError, fmt, parse_config, read_model_file, write_csv, write_ensemble, write_model_file
from .models import Family, GlmModel, ModelError, model_constants
from .ou import OuGenerator, limit_params, max_ineq_grid
from .sgld import AlgoConfig, SgldGenerator, make_ensemble
from .studies import check_assumptions, rate_configs, rate_study

COMMANDS = ("simulate", "compare", "rate-study", "ou-verify", "metrics", "bounds", "var-avg")

KNOWN_KEYS = {
    # model source
    "model_file", "family", "n", "scale", "theta_true", "intercept", "noise", "data_seed", "domain",
    # algorithm
    "setting", "h", "b", "beta_inv", "beta_scale", "alpha", "w", "c1", "c2", "c3", "w1", "w2", "m",
    # studies
    "seed", "replicates", "path", "h_grid", "functional", "estimator", "eps_grid", "dictionary", "max_paths",
    "a_grid", "A_grid", "p_grid", "gamma", "grid_size", "K1", "K3", "c_num", "C_bar", "calib",
    "assumption_replicates", "eps",
}

_REQUIRED = object()


def _number(text: str) -> float:
    """Float, also accepting ``inf`` and powers written like ``2^-4``."""
    t = text.strip().lower()
    if "^" in t:
        base, exp = t.split("^", 1)
        return float(base) ** float(exp)
    return float(t)


def _integer(text: str) -> int:
    v = _number(text)
    if v != int(v):
        raise ValueError(f"not an integer: {text}")
    return int(v)


def _numbers(text: str) -> list[float]:
    return [_number(t) for t in text.split(",") if t.strip()]


class Config:
    """Typed access to a parsed config that records every value it hands out."""

    def __init__(self, raw: dict[str, str], source: str):
        unknown = sorted(set(raw) - KNOWN_KEYS)
        if unknown:
            raise ConfigError(f"{source}: unknown keys: {', '.join(unknown)}")
        self.raw, self.source = dict(raw), source
        self.used: dict[str, str] = {}

    def has(self, key):
        return key in self.raw

    def get(self, key, conv=str, default=_REQUIRED):
        if key in self.raw:
            text = self.raw[key]
            try:
                value = conv(text)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{self.source}: bad value for {key}: {text!r} ({exc})") from exc
            self.used[key] = text
            return value
        if default is _REQUIRED:
            raise ConfigError(f"{self.source}: missing required key {key!r}")
        if default is not None:
            self.used[key] = ",".join(fmt(v) for v in default) if isinstance(default, list) else fmt(default)
        return default

    def echo(self) -> dict[str, str]:
        out = dict(self.raw)
        out.update(self.used)
        return dict(sorted(out.items()))


# ---------------------------------------------------------------- shared setup


def load_model(cfg: Config) -> GlmModel:
    if cfg.has("model_file"):
        path = Path(cfg.get("model_file"))
        if not path.is_absolute():
            path = Path(cfg.source).parent / path  # relative to the config file
        path = path.resolve()
        cfg.used["model_file"] = str(path)
        if not path.exists():
            raise ConfigError(f"model file not found: {path}")
        return read_model_file(path)
    family = cfg.get("family", lambda s: Family(s.lower()))
    domain = cfg.get("domain", lambda s: tuple(_numbers(s)), None)
    if domain is not None and len(domain) != 2:
        raise ConfigError("domain must be 'lo,hi'")
    spec = SynthSpec(
        family=family,
        n=cfg.get("n", _integer),
        scale=cfg.get("scale", _number, 1.0),
        theta_true=cfg.get("theta_true", _number, 1.0),
        intercept=cfg.get("intercept", _number, 0.0),
        noise=cfg.get("noise", _number, 1.0),
        domain=domain,
    )
    return synth_data(spec, cfg.get("data_seed", _integer, 1))


def algo_config(cfg: Config, n: int, seed: int) -> AlgoConfig:
    setting = cfg.get("setting", str.lower, "numerical")
    if setting == "raw":
        return AlgoConfig(cfg.get("h", _number), cfg.get("b", _integer, 1), cfg.get("beta_inv", _number, 0.0),
                          cfg.get("alpha", _integer), cfg.get("w", _number, 1.0), seed)
    if setting == "numerical":
        return AlgoConfig.numerical(cfg.get("h", _number), cfg.get("b", _integer, 1),
                                    cfg.get("beta_inv", _number, 0.0), cfg.get("c1", _number, 1.0),
                                    cfg.get("c2", _number, 1.0), cfg.get("c3", _number, 1.0), seed)
    if setting == "statistical":
        return AlgoConfig.statistical(n, cfg.get("b", _integer, 1), cfg.get("w1", _number, 1.0),
                                      cfg.get("w2", _number, 1.0), cfg.get("m", _number, 1.0), seed)
    raise ConfigError(f"unknown setting {setting!r} (raw, numerical or statistical)")


def study_configs(cfg: Config, seed: int):
    """Numerical preset along h_grid with beta = beta_scale / h."""
    grid = cfg.get("h_grid", _numbers, [2.0**-k for k in range(4, 10)])
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("h_grid must be strictly decreasing")
    return rate_configs(grid, cfg.get("b", _integer, 1), cfg.get("beta_scale", _number, 1.0),
                        cfg.get("c1", _number, 1.0), cfg.get("c2", _number, 1.0), cfg.get("c3", _number, 1.0),
                        seed)


def _replicates(cfg, default, minimum=1):
    R = cfg.get("replicates", _integer, default)
    if R < minimum:
        raise ConfigError(f"replicates must be >= {minimum}")
    return R


# ---------------------------------------------------------------- commands


def cmd_simulate(cfg, out, seed, threads, notes):
    model = load_model(cfg)
    const = model_constants(model)
    config = algo_config(cfg, model.n, seed)
    R = _replicates(cfg, 100)
    kind = cfg.get("path", str.lower, "sgld")
    if kind == "ou":
        gen = OuGenerator(limit_params(const, config), config.alpha, rngmod.derive_seed(seed, "ou"), "ou_Z")
    else:
        gen = SgldGenerator(model, const, config, kind, label={"sgld": "Y", "linearized": "Ylin"}.get(kind, kind))
    ens = make_ensemble(gen, R, threads)
    notes["realized_alpha"] = config.alpha
    write_ensemble(out / f"{ens.label}.csv", ens)
    from .plotting import plot_paths

    plot_paths(ens, out / f"{ens.label}.png")


def _y_and_z(cfg, seed, threads, notes, default_R):
    model = load_model(cfg)
    const = model_constants(model)
    config = algo_config(cfg, model.n, seed)
    R = _replicates(cfg, default_R, 2)
    notes["realized_alpha"] = config.alpha
    ens_y = make_ensemble(SgldGenerator(model, const, config, "sgld", "Y"), R, threads)
    params = limit_params(const, config)
    ens_z = make_ensemble(OuGenerator(params, config.alpha, rngmod.derive_seed(seed, "ou"), "ou_Z"), R, threads)
    return ens_y, ens_z


DIST_HEADER = ["method", "value", "stderr_or_resolution", "replicates", "labelA", "labelB"]


def cmd_compare(cfg, out, seed, threads, notes):
    ens_y, ens_z = _y_and_z(cfg, seed, threads, notes, 10_000)
    rows = [functional_gap(ens_y, ens_z, g).csv_row(ens_y.label, ens_z.label) for g in (g1(), g2())]
    write_csv(out / "distances.csv", DIST_HEADER, rows)


def cmd_metrics(cfg, out, seed, threads, notes):
    ens_y, ens_z = _y_and_z(cfg, seed, threads, notes, 1000)
    grid = cfg.get("eps_grid", _numbers, [0.01 * k for k in range(1, 101)])
    dictionary = parse_dictionary(cfg.get("dictionary", str, "clipsup:1,evalclip:0.5:1,evalclip:1:1,clipavg:1"))
    max_paths = cfg.get("max_paths", _integer, 1000)
    lp = levy_prokhorov_estimate(ens_y, ens_z, grid, max_paths)
    bw = bounded_wasserstein_lower(ens_y, ens_z, dictionary)
    rows = [lp.csv_row(ens_y.label, ens_z.label), bw.csv_row(ens_y.label, ens_z.label)]
    if lp.censored:
        rows[0][0] = "lp_surrogate_censored"
    write_csv(out / "metrics.csv", DIST_HEADER, rows)


RATE_HEADER = ["h", "alpha", "w", "beta_inv", "B", "A", "gap", "stderr", "replicates"]


def cmd_rate_study(cfg, out, seed, threads, notes):
    model = load_model(cfg)
    const = model_constants(model)
    configs = study_configs(cfg, seed)
    R = _replicates(cfg, 200_000, 2)
    functional = cfg.get("functional", str.lower, "g2")
    estimator = cfg.get("estimator", str.lower, "coupled")
    notes["realized_alpha"] = ",".join(str(c.alpha) for c in configs)
    study = rate_study(model, const, configs, R, functional, estimator, threads)
    write_csv(out / "rate_study.csv", RATE_HEADER,
              [[p.h, p.alpha, p.w, p.beta_inv, p.B, p.A, p.gap, p.stderr, p.replicates] for p in study.points])
    write_csv(out / "rate_slope.csv", ["functional", "estimator", "slope", "slope_se", "intercept", "points"],
              [[study.functional, study.estimator, study.slope, study.slope_se, study.intercept, len(study.points)]])
    from .plotting import plot_rate_study

    plot_rate_study(study, out / "rate_study.png")
    print(f"slope = {study.slope:.4f} +- {study.slope_se:.4f}")


def cmd_var_avg(cfg, out, seed, threads, notes):
    model = load_model(cfg)
    const = model_constants(model)
    configs = study_configs(cfg, seed)
    R = _replicates(cfg, 200_000, 2)
    eps = cfg.get("eps", _number, None)
    notes["realized_alpha"] = ",".join(str(c.alpha) for c in configs)
    study = rate_study(model, const, configs, R, "g1", "coupled", threads)
    header = ["h", "alpha", "var_y", "var_y_stderr", "var_z_analytic", "gap", "mean_y", "mean_y_stderr",
              "mean_rhs", "K1_hat", "rhs_bound"]
    rows = []
    for p in study.points:
        rhs = "" if eps is None else (G1_NORM * abs(p.mean_y) + G2_NORM) * eps
        rows.append([p.h, p.alpha, p.var_y, p.var_y_stderr, p.var_z, p.var_gap, p.mean_y, p.mean_y_stderr,
                     p.mean_rhs, p.K1_hat, rhs])
    write_csv(out / "var_avg.csv", header, rows)
    from .plotting import plot_variance

    plot_variance(study.points, out / "var_avg.png")


def cmd_ou_verify(cfg, out, seed, threads, notes):
    a_grid = cfg.get("a_grid", _numbers, [0.5, 1.0, 2.0, 4.0])
    A_grid = cfg.get("A_grid", _numbers, [0.5, 2.0])
    p_grid = cfg.get("p_grid", _numbers, [1.0, 2.0, 3.0])
    gamma_text = cfg.get("gamma", str, "g0")
    grid_size = cfg.get("grid_size", _integer, 1000)
    R = _replicates(cfg, 100_000, 100)
    gamma = "g0" if gamma_text.lower() == "g0" else _number(gamma_text)
    grid = max_ineq_grid(a_grid, A_grid, p_grid, gamma, grid_size, R, seed)
    cols = ["a", "A", "gamma", "p", "lhs_mc", "stderr", "rhs_no_cp", "implied_cp"]
    write_csv(out / "max_ineq.csv", cols, [[r[c] for c in cols] for r in grid])
    from .plotting import plot_implied_cp

    plot_implied_cp(grid, out / "implied_cp.png")


def cmd_bounds(cfg, out, seed, threads, notes, explain=False):
    model = load_model(cfg)
    const = model_constants(model)
    config = algo_config(cfg, model.n, seed)
    notes["realized_alpha"] = config.alpha
    k_text = (cfg.get("K1", str, "auto"), cfg.get("K3", str, "auto"))
    if "auto" in (k_text[0].lower(), k_text[1].lower()):
        rep = check_assumptions(const, config, model, cfg.get("assumption_replicates", _integer, 2000), threads)
        for f in rep.failures:
            print(f"assumption check: {f}", file=sys.stderr)
    K = []
    for text, auto in zip(k_text, ("K1_hat", "K3_hat")):
        if text.lower() == "auto":
            val = getattr(rep, auto)
            if not math.isfinite(val):
                raise ArithmeticError(f"could not estimate {auto} (assumption checks failed)")
            K.append(val)
        else:
            K.append(_number(text))
    C_bar = cfg.get("C_bar", _number, None)
    inputs = bd.BoundInputs.from_model(const, config, K[0], K[1], cfg.get("c_num", _number, 1.0), C_bar)
    br = bd.eps_components(inputs)
    try:
        simplified = bd.general_simplified_bound(inputs)
    except bd.BoundInputError as exc:
        print(f"general simplified bound skipped: {exc}", file=sys.stderr)
        simplified = math.nan
    rate = bd.simplified_rate_for(const, config, cfg.get("calib", _number, 1.0))
    echo = ["L", "C_R", "Omega", "Sigma", "psi4", "psi6", "h", "b", "beta_inv", "alpha", "w", "K1", "K3", "c_num"]
    header = echo + list(bd.BoundBreakdown.COLUMNS) + ["general_simplified", "simplified_rate", "flags"]
    row = [getattr(inputs, k) for k in echo] + [getattr(br, k) for k in bd.BoundBreakdown.COLUMNS]
    row += [simplified, rate, ";".join(br.flags)]
    write_csv(out / "bounds.csv", header, [row])
    text = bd.explain(inputs)
    (out / "bounds_explain.txt").write_text(text + "\n", encoding="utf-8")
    if explain:
        print(text)


HANDLERS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "rate-study": cmd_rate_study,
    "ou-verify": cmd_ou_verify,
    "metrics": cmd_metrics,
    "bounds": cmd_bounds,
    "var-avg": cmd_var_avg,
}


def write_manifest(out: Path, command: str, cfg: Config, notes: dict):
    lines = [
        "# sgldscale run manifest; rerun with --config pointing at this file",
        f"# command = {command}",
        f"# version = {__version__}",
        f"# mixer = splitmix64 counter streams",
    ]
    lines += [f"# {k} = {fmt(v)}" for k, v in notes.items()]
    lines += [f"{k} = {v}" for k, v in cfg.echo().items()]
    (out / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgldscale", description="SG(L)D scaling-limit laboratory")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="key = value config file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="master seed (u64), overrides the config")
        sp.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
        if name == "bounds":
            sp.add_argument("--explain", action="store_true", help="print every formula term with its value")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        path = Path(args.config)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        cfg = Config(parse_config(text, str(path)), str(path))
        if args.seed is not None:
            cfg.raw["seed"] = str(args.seed)
        seed = rngmod.check_seed(cfg.get("seed", _integer, 0))
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        notes: dict = {}
        handler = HANDLERS[args.command]
        if args.command == "bounds":
            handler(cfg, out, seed, args.threads, notes, explain=args.explain)
        else:
            handler(cfg, out, seed, args.threads, notes)
        write_manifest(out, args.command, cfg, notes)
    except (ConfigError, ModelError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, MemoryError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    return 0


def main():  # pragma: no cover - console entry point
    sys.exit(run())


# synth_data is part of the command-line surface
__all__ = ["run", "main", "synth_data", "SynthSpec", "write_model_file"]
