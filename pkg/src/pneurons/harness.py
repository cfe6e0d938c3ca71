"""Experiment configuration, dispatch and file output.

A run is fully determined by its resolved configuration: the same
configuration always writes byte-identical files.  Outputs are staged in
a temporary directory and moved into place only after the run succeeds.
"""
from __future__ import annotations

import configparser
import hashlib
import io
import json
import os
import re
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import __version__
from .entropy import IrwinHallUnit, OneM1RCell, TwoMCell, UniformUnit, CELL_SLLG
from .errors import PNeuronError
from .network import (
    P_AND_TRUTH,
    boltzmann_exact,
    build_p_and,
    compare_distributions,
    run_histogram,
    state_index,
)
from .neuron import (
    AnalogPNeuron,
    DigitalPNeuron,
    linf,
    probabilistic_range,
    probabilistic_range_theory,
    transfer_curve,
    word_sweep,
)
from .seeding import SEED_LIMIT
from .sllg import SllgParams, SmtjState, implied_tmr, random_direction, simulate_trace, stationarity_report
from .seeding import generator
from .stats import distribution_stats, is_unimodal, ks_statistic, linear_fit, triangular_cdf, uniform_cdf

EXPERIMENTS = ("transfer", "sllg", "dist", "network", "range")
EXPERIMENT_ALIASES = {"sllg_trace": "sllg", "distribution": "dist", "range_sweep": "range"}


class ConfigError(PNeuronError, ValueError):
    """Schema violation; ``line`` points into the config file when known."""

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        super().__init__(message)
        self.line = line
        self.path = path

    def __str__(self):
        where = ""
        if self.path:
            where = f"{self.path}:{self.line}: " if self.line else f"{self.path}: "
        elif self.line:
            where = f"line {self.line}: "
        return where + super().__str__()


# ---------------------------------------------------------------------------
# schema


def _int(lo=None, hi=None):
    def conv(v):
        try:
            x = int(str(v), 0) if isinstance(v, str) else int(v)
        except ValueError:
            raise ValueError(f"expected an integer, got {v!r}") from None
        if lo is not None and x < lo:
            raise ValueError(f"{x} is below the minimum {lo}")
        if hi is not None and x > hi:
            raise ValueError(f"{x} is above the maximum {hi}")
        return x
    return conv


def _float(positive=False, nonneg=False):
    def conv(v):
        try:
            x = float(v)
        except ValueError:
            raise ValueError(f"expected a number, got {v!r}") from None
        if positive and not x > 0 or nonneg and x < 0:
            raise ValueError(f"{x} must be {'positive' if positive else 'non-negative'}")
        return x
    return conv


def _choice(*options, aliases=None):
    aliases = aliases or {}
    def conv(v):
        v = aliases.get(str(v), str(v))
        if v not in options:
            raise ValueError(f"{v!r} is not one of {options}")
        return v
    return conv


def _floats(positive=True):
    def conv(v):
        items = v if isinstance(v, (list, tuple)) else str(v).split(",")
        out = [_float(positive=positive)(x) for x in items if str(x).strip()]
        if not out:
            raise ValueError("expected a comma-separated list of numbers")
        return out
    return conv


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {v!r}")


def _clamp(v):
    if isinstance(v, dict):
        return v
    out = {}
    for item in filter(None, (s.strip() for s in str(v).split(","))):
        m = re.fullmatch(r"(\d+)\s*=\s*([+-]?1)", item)
        if not m:
            raise ValueError(f"clamp entries look like '2=+1', got {item!r}")
        out[int(m.group(1))] = int(m.group(2))
    return out


_KIND = _choice("p_tanh", "p_sigmoid", "p_relu", "p_linear",
                aliases={"tanh": "p_tanh", "sigmoid": "p_sigmoid", "relu": "p_relu", "linear": "p_linear"})

SCHEMA: dict[str, dict[str, tuple[Callable, Any]]] = {
    "transfer": {
        "kind": (_KIND, "p_sigmoid"),
        "impl": (_choice("digital", "analog"), "digital"),
        "points": (_int(2), 65),
        "samples": (_int(1), 100_000),
        "beta": (_float(positive=True), 1.0),
        "distribution": (_choice("auto", "triangular", "uniform"), "auto"),
        "v_dd": (_float(positive=True), 0.8),
        "source": (_choice("sllg", "stationary"), "sllg"),
        "amp": (_choice("behavioral", "ideal"), "behavioral"),
    },
    "sllg": {
        "steps": (_int(1), 100_000),
        "record_every": (_int(1), 1),
        "dt": (_float(positive=True), 1e-12),
        "damping": (_float(positive=True), 0.01),
        "temperature": (_float(nonneg=True), 300.0),
        "ms": (_float(positive=True), 1.1e6),
        "diameter": (_float(positive=True), 22e-9),
        "thickness": (_float(positive=True), 2e-9),
        "burn_in": (_int(0), 0),
    },
    "dist": {
        "cell": (_choice("2m", "1m1r", "irwin_hall", "uniform"), "2m"),
        "samples": (_int(2), 1_000_000),
        "v_dd": (_float(positive=True), 0.8),
        "source": (_choice("sllg", "stationary"), "sllg"),
        "bins": (_int(1), 100),
    },
    "network": {
        "preset": (_choice("p_and"), "p_and"),
        "sweeps": (_int(1), 1_000_000),
        "burn_in": (_int(0), 1000),
        "i0": (_float(positive=True), 2.0),
        "sampler": (_choice("comparator", "logistic"), "comparator"),
        "rng": (_choice("shared", "independent"), "shared"),
        "clamp": (_clamp, {}),
        "random_scan": (_bool, False),
    },
    "range": {
        "v_dd": (_floats(), [0.2, 0.4, 0.6, 0.8]),
        "beta": (_floats(), [1.0]),
        "points": (_int(3), 801),
        "samples": (_int(1), 200_000),
        "lo": (_float(nonneg=True), 0.05),
        "hi": (_float(positive=True), 0.95),
        "polarization": (_float(positive=True), 0.7),
        "source": (_choice("sllg", "stationary"), "sllg"),
    },
}
COMMON = {"seed": (_int(0, SEED_LIMIT - 1), 0), "out": (str, "out")}


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict
    seed: int = 0
    output_path: str = "out"
    workers: int = 1  # execution detail only; never serialized, never changes output bytes

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp["experiment"] = {"name": self.experiment, "seed": str(self.seed)}
        cp[self.experiment] = {k: _render(v) for k, v in sorted(self.params.items())}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "seed": self.seed, "params": dict(sorted(self.params.items()))}


def _render(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        return ",".join(repr(float(x)) for x in v)
    if isinstance(v, dict):
        return ",".join(f"{k}={val:+d}" for k, val in sorted(v.items()))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _key_lines(path: str) -> dict:
    """(section, key) -> 1-based line number, for error messages."""
    lines = {}
    section = None
    with open(path) as fh:
        for no, raw in enumerate(fh, 1):
            s = raw.strip()
            m = re.fullmatch(r"\[([^\]]+)\]", s)
            if m:
                section = m.group(1).strip()
                lines[(section, None)] = no
            elif section and s and s[0] not in "#;" and re.match(r"[^=:]+[=:]", s):
                key = re.split(r"[=:]", s, 1)[0].strip().lower()
                lines[(section, key)] = no
    return lines


def load_config_file(path: str) -> tuple[dict, dict]:
    """Parse a config file into ({section: {key: raw}}, line map)."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=path) from None
    except configparser.ParsingError as exc:
        line, text = exc.errors[0]
        raise ConfigError(f"malformed line {text.strip()!r}", line, path) from None
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"malformed config: {exc.message.splitlines()[0]}", line, path) from None
    return {s: dict(cp[s]) for s in cp.sections()}, _key_lines(path)


def resolve(experiment: str, file_values: Optional[dict] = None, overrides: Optional[dict] = None,
            lines: Optional[dict] = None, path: Optional[str] = None) -> ExperimentConfig:
    """Validate file values and command-line overrides into a config."""
    experiment = EXPERIMENT_ALIASES.get(experiment, experiment)
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}", path=path)
    file_values = file_values or {}
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    lines = lines or {}
    schema = SCHEMA[experiment]

    for section, values in file_values.items():
        if section == "experiment":
            allowed = {"name", "seed", "out"}
            named = values.get("name")
            named = EXPERIMENT_ALIASES.get(named, named)
            if named is not None and named != experiment:
                raise ConfigError(f"config is for experiment {named!r}, not {experiment!r}",
                                  lines.get((section, "name")), path)
        elif section == experiment:
            allowed = set(schema)
        else:
            raise ConfigError(f"unexpected section [{section}]", lines.get((section, None)), path)
        for key in values:
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{section}]", lines.get((section, key)), path)

    def convert(conv, raw, key, section):
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            line = None if key in overrides else lines.get((section, key))
            src = f"--{key.replace('_', '-')}" if key in overrides else key
            raise ConfigError(f"{src}: {exc}", line, None if key in overrides else path) from None

    params = {}
    body = file_values.get(experiment, {})
    for key, (conv, default) in schema.items():
        raw = overrides.get(key, body.get(key, default))
        params[key] = convert(conv, raw, key, experiment)
    head = file_values.get("experiment", {})
    seed = convert(COMMON["seed"][0], overrides.get("seed", head.get("seed", 0)), "seed", "experiment")
    out = overrides.get("out", head.get("out", "out"))
    workers = convert(_int(1), overrides.get("workers", 1), "workers", "experiment")
    cfg = ExperimentConfig(experiment, params, seed, out, workers)
    _cross_check(cfg, lines, path)
    return cfg


def _cross_check(cfg: ExperimentConfig, lines, path):
    p = cfg.params
    sec = cfg.experiment
    if sec == "transfer" and p["impl"] == "analog" and p["kind"] == "p_linear":
        raise ConfigError("p_linear has no analog realisation", lines.get((sec, "kind")), path)
    if sec == "network" and not p["sweeps"] > p["burn_in"]:
        raise ConfigError("sweeps must exceed burn_in", lines.get((sec, "sweeps")), path)
    if sec == "range" and not p["lo"] < p["hi"] <= 1:
        raise ConfigError("need lo < hi <= 1", lines.get((sec, "hi")), path)
    if sec == "network":
        for i in p["clamp"]:
            if i >= 3:
                raise ConfigError(f"clamp index {i} out of range", lines.get((sec, "clamp")), path)


# ---------------------------------------------------------------------------
# experiments


@dataclass
class RunResult:
    status: int
    files: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def _g(x) -> str:
    return f"{x:.9g}"


def _digital_unit(kind, distribution, seed):
    if distribution == "auto":
        distribution = "triangular" if kind in ("p_tanh", "p_sigmoid") else "uniform"
    cls = IrwinHallUnit if distribution == "triangular" else UniformUnit
    return cls.from_seed(seed)


def _exp_transfer(cfg: ExperimentConfig) -> tuple[dict, dict]:
    p = cfg.params
    if p["impl"] == "digital":
        neuron = DigitalPNeuron(p["kind"], _digital_unit(p["kind"], p["distribution"], cfg.seed), p["beta"])
        sweep = word_sweep(p["kind"], p["points"])
    else:
        cell = (OneM1RCell if p["kind"] == "p_relu" else TwoMCell)(p["v_dd"], source=p["source"])
        neuron = (AnalogPNeuron.ideal(p["kind"], cell, p["beta"]) if p["amp"] == "ideal"
                  else AnalogPNeuron(p["kind"], cell, beta=p["beta"]))
        sweep = np.linspace(0.0, p["v_dd"], p["points"])
    curve = transfer_curve(neuron, sweep, p["samples"], cfg.seed, workers=cfg.workers)
    buf = io.StringIO()
    rows = [[str(int(x)) if p["impl"] == "digital" else _g(x), _g(y), str(int(n))]
            for x, y, n in zip(curve.inputs, curve.means, curve.counts)]
    files = {"transfer.csv": _csv_text(["input", "mean", "n"], rows),
             "transfer.meta.json": json.dumps(curve.meta, indent=2, sort_keys=True) + "\n"}
    summary = {}
    if p["impl"] == "digital":
        summary["linf_vs_oracle"] = linf(curve, neuron.oracle(sweep))
        summary["hoeffding_bound"] = 3 * float(np.sqrt(np.log(2 / 0.01) / (2 * p["samples"])))
    try:
        summary["probabilistic_range"] = probabilistic_range(curve)
    except PNeuronError:
        summary["probabilistic_range"] = None
    return files, summary


def _exp_sllg(cfg):
    p = cfg.params
    params = SllgParams(damping=p["damping"], ms=p["ms"], diameter=p["diameter"], thickness=p["thickness"],
                        temperature=p["temperature"], dt=p["dt"])
    init = SmtjState(tuple(random_direction(generator(cfg.seed, "sllg/init"))))
    trace = simulate_trace(params, init, p["steps"], cfg.seed, p["record_every"])
    rows = [[_g(t), _g(m[0]), _g(m[1]), _g(m[2]), _g(g)] for t, m, g in zip(trace.t, trace.m, trace.g)]
    files = {"trace.csv": _csv_text(["t_s", "mx", "my", "mz", "G_S"], rows)}
    summary = {"records": len(trace), "mz_correlation_time_s": params.mz_correlation_time}
    if len(trace) - p["burn_in"] >= 1000:
        rep = stationarity_report(trace, p["burn_in"])
        summary.update(ks_uniform_mz=rep.ks_uniform_mz, autocorrelation_time=rep.autocorrelation_time,
                       n_effective=rep.n_effective)
    return files, summary


def _exp_dist(cfg):
    p = cfg.params
    cell = p["cell"]
    n = p["samples"]
    if cell == "2m":
        x = TwoMCell(p["v_dd"], source=p["source"], seed=cfg.seed).samples(n)
        ref = None
    elif cell == "1m1r":
        x = OneM1RCell(p["v_dd"], source=p["source"], seed=cfg.seed).samples(n)
        ref = uniform_cdf(float(x.min()), float(x.max()))
    elif cell == "irwin_hall":
        x = IrwinHallUnit.from_seed(cfg.seed).draws(n).astype(float)
        ref = triangular_cdf(0.0, 2.0**32)
    else:
        x = UniformUnit.from_seed(cfg.seed).draws(n).astype(float)
        ref = uniform_cdf(0.0, 2.0**32)
    st = distribution_stats(x)
    counts, edges = np.histogram(x, bins=p["bins"])
    width = edges[1] - edges[0]
    rows = [[_g(edges[i]), _g(edges[i + 1]), str(int(c)), _g(c / (n * width))] for i, c in enumerate(counts)]
    files = {"histogram.csv": _csv_text(["bin_lo", "bin_hi", "count", "density"], rows)}
    summary = dict(st._asdict())
    summary["unimodal"] = is_unimodal(x)
    if ref is not None:
        summary["ks_vs_reference"] = ks_statistic(x, ref)
    return files, summary


def _exp_network(cfg):
    p = cfg.params
    net = build_p_and(p["i0"], cfg.seed)
    net.clamp = dict(p["clamp"])
    net.random_scan = p["random_scan"]
    for i, v in net.clamp.items():
        net.state[i] = v
    hist = run_histogram(net, p["sweeps"], p["burn_in"], cfg.seed, p["sampler"], p["rng"])
    exact = boltzmann_exact(net.J, net.h, net.i0)
    cmp = compare_distributions(hist, exact)
    pr = hist.probabilities
    rows = [[format(k, "03b"), str(int(c)), _g(pr[k]), _g(exact[k])] for k, c in enumerate(hist.counts)]
    files = {"histogram.csv": _csv_text(["state_bits", "count", "empirical_p", "exact_p"], rows)}
    truth = [state_index(s) for s in P_AND_TRUTH]
    summary = {"tv_distance": cmp.tv_distance, "kl_divergence": cmp.kl_divergence,
               "truth_table_mass": float(pr[truth].sum())}
    return files, summary


def _exp_range(cfg):
    p = cfg.params
    rows = []
    theory = probabilistic_range_theory(implied_tmr(p["polarization"]))
    vdds, widths = [], []
    for v_dd in p["v_dd"]:
        for beta in p["beta"]:
            cell = TwoMCell(v_dd, polarization=p["polarization"], source=p["source"])
            neuron = AnalogPNeuron.ideal("p_tanh", cell, beta)
            curve = transfer_curve(neuron, np.linspace(0.0, v_dd, p["points"]), p["samples"], cfg.seed,
                                   workers=cfg.workers, common_random_numbers=True)
            width = probabilistic_range(curve, p["lo"], p["hi"])
            extreme = probabilistic_range(curve, 0.0, 1.0)
            rows.append([_g(v_dd), _g(beta), _g(width), _g(width / v_dd), _g(extreme / v_dd), _g(theory)])
            if beta == p["beta"][0]:
                vdds.append(v_dd)
                widths.append(width)
    files = {"range.csv": _csv_text(["v_dd", "beta", "range_v", "ratio", "extreme_ratio", "theory_ratio"], rows)}
    summary = {"theory_ratio": theory}
    if len(vdds) >= 2:
        slope, intercept, r2 = linear_fit(vdds, widths)
        summary.update(slope=slope, intercept=intercept, r_squared=r2)
    return files, summary


_DISPATCH = {"transfer": _exp_transfer, "sllg": _exp_sllg, "dist": _exp_dist,
             "network": _exp_network, "range": _exp_range}


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(type(o))


def run(cfg: ExperimentConfig) -> RunResult:
    """Run one experiment and write its files plus ``run.ini`` and ``manifest.json``."""
    files, summary = _DISPATCH[cfg.experiment](cfg)
    files["run.ini"] = cfg.to_ini()
    manifest = {
        "artifact": "pneurons",
        "version": __version__,
        "config": cfg.to_dict(),
        "outputs": {name: hashlib.sha256(text.encode()).hexdigest() for name, text in sorted(files.items())},
        "summary": summary,
    }
    files["manifest.json"] = json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n"
    out = Path(cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out))
    try:
        for name, text in files.items():
            with open(staging / name, "w", newline="") as fh:
                fh.write(text)
        for name in files:
            os.replace(staging / name, out / name)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return RunResult(0, {name: str(out / name) for name in files}, summary)
