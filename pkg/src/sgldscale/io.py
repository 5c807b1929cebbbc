"""Text formats: model files, ensemble CSVs with sidecars, report CSVs, config files."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .models import Family, GlmModel, ModelError
from .sgld import PathEnsemble


class ConfigError(ValueError):
    pass


def fmt(v) -> str:
    """Round-trippable text for CSV cells (17 significant digits for floats)."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    if v is None:
        return ""
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# ---------------------------------------------------------------- ensembles


def write_ensemble(path, ens: PathEnsemble) -> Path:
    """CSV with a time column then one column per replicate, plus ``.meta`` sidecar."""
    path = Path(path)
    R = ens.R
    header = ["t"] + [f"rep_{r}" for r in range(R)]
    times = np.arange(ens.alpha + 1) / ens.alpha
    rows = ([t] + list(ens.values[:, k]) for k, t in enumerate(times))
    write_csv(path, header, rows)
    meta = {"label": ens.label, "alpha": ens.alpha, "w": ens.w, "seed_base": ens.seed_base, "replicates": R}
    meta.update(ens.meta)
    with path.with_suffix(".meta").open("w", encoding="utf-8") as fh:
        for k, v in meta.items():
            fh.write(f"{k}={fmt(v)}\n")
    return path


def read_ensemble(path) -> PathEnsemble:
    path = Path(path)
    header, rows = read_csv(path)
    if not header or header[0] != "t":
        raise ValueError(f"{path}: not an ensemble CSV")
    data = np.array([[float(c) for c in r] for r in rows])
    meta = {}
    side = path.with_suffix(".meta")
    if side.exists():
        for line in side.read_text(encoding="utf-8").splitlines():
            if "=" in line:
                k, v = line.split("=", 1)
                meta[k.strip()] = v.strip()
    alpha = data.shape[0] - 1
    return PathEnsemble(data[:, 1:].T.copy(), alpha, float(meta.get("w", 1.0)), meta.get("label", path.stem),
                        int(meta.get("seed_base", 0)), meta)


# ---------------------------------------------------------------- model files


def read_model_file(path) -> GlmModel:
    """Header ``family=... intercept=... [domain=lo,hi]`` then ``x,y`` lines."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc.strerror}") from exc
    lines = [ln.strip() for ln in lines if ln.strip() and not ln.strip().startswith("#")]
    if not lines:
        raise ModelError(f"{path}: empty model file")
    opts = {}
    for tok in lines[0].split():
        if "=" not in tok:
            raise ModelError(f"{path}: bad header token {tok!r}")
        k, v = tok.split("=", 1)
        opts[k.strip().lower()] = v.strip()
    unknown = set(opts) - {"family", "intercept", "domain"}
    if unknown:
        raise ModelError(f"{path}: unknown header keys {sorted(unknown)}")
    if "family" not in opts:
        raise ModelError(f"{path}: header must name the family")
    try:
        family = Family(opts["family"].lower())
    except ValueError as exc:
        raise ModelError(f"{path}: unknown family {opts['family']!r}") from exc
    domain = None
    if "domain" in opts:
        parts = opts["domain"].split(",")
        if len(parts) != 2:
            raise ModelError(f"{path}: domain must be lo,hi")
        domain = (float(parts[0]), float(parts[1]))
    xs, ys = [], []
    for no, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 2:
            raise ModelError(f"{path}:{no}: expected 'x,y'")
        try:
            xs.append(float(parts[0]))
            ys.append(float(parts[1]))
        except ValueError as exc:
            raise ModelError(f"{path}:{no}: {exc}") from exc
    return GlmModel(family, np.array(xs), np.array(ys), float(opts.get("intercept", 0.0)), domain)


def write_model_file(path, model: GlmModel) -> Path:
    path = Path(path)
    head = f"family={model.family.value} intercept={fmt(model.intercept)}"
    if model.theta_domain is not None:
        head += f" domain={fmt(model.theta_domain[0])},{fmt(model.theta_domain[1])}"
    body = "".join(f"{fmt(x)},{fmt(y)}\n" for x, y in zip(model.x, model.y))
    path.write_text(head + "\n" + body, encoding="utf-8")
    return path


# ---------------------------------------------------------------- config files


def parse_config(text: str, source: str = "<config>") -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; duplicate keys are errors."""
    out: dict[str, str] = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{no}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{no}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{no}: duplicate key {key!r}")
        out[key] = value
    return out
