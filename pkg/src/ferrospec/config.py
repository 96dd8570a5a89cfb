"""Run configuration: a single versioned YAML file, validated with errors
that name the offending key."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import yaml

from .grid import Grid
from .integrate import TimeGrid
from .spectral import gradient_part, leray_project
from .state import Envelope, ExternalField, Params, State
from . import fields as field_ops


CONFIG_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _require(cond: bool, key: str, why: str):
    if not cond:
        raise ConfigError(f"{key}: {why}")


@dataclass
class RunConfig:
    raw: dict
    seed: int = 0
    output_dir: str = "out"

    # -- builders ---------------------------------------------------------

    def build_grid(self) -> Grid:
        g = self.raw.get("grid", {})
        n = g.get("n")
        _require(isinstance(n, int) and n >= 8, "grid.n",
                 "must be an integer >= 8")
        _require(n % 2 == 0, "grid.n", "must be even")
        box = float(g.get("box_length", 2.0 * np.pi))
        _require(box > 0, "grid.box_length", "must be > 0")
        return Grid(n, box, bool(g.get("dealias", True)))

    def build_params(self) -> Params:
        p = self.raw.get("params", {})
        for key in ("nu", "sigma", "tau", "chi0"):
            _require(key in p, f"params.{key}", "is required")
            _require(float(p[key]) > 0, f"params.{key}", "must be > 0")
        return Params(nu=float(p["nu"]), sigma=float(p["sigma"]),
                      tau=float(p["tau"]), chi0=float(p["chi0"]))

    def build_time_grid(self) -> TimeGrid:
        t = self.raw.get("time", {})
        _require("t_end" in t and float(t["t_end"]) > 0, "time.t_end",
                 "must be > 0")
        _require("n_steps" in t and int(t["n_steps"]) >= 1, "time.n_steps",
                 "must be a positive integer")
        return TimeGrid(float(t["t_end"]), int(t["n_steps"]))

    @property
    def eps_fraction(self) -> float:
        frac = float(self.raw.get("time", {}).get("eps_fraction", 0.1))
        _require(0 < frac < 1, "time.eps_fraction", "must lie in (0, 1)")
        return frac

    def build_state(self, grid: Grid) -> State:
        spec = self.raw.get("initial", {})
        comps = {}
        for name, offset in (("u", 0), ("m", 1), ("r", 2)):
            comps[name] = self._build_component(
                grid, spec.get(name, {"kind": "zero"}), f"initial.{name}",
                offset)
        return State(
            leray_project(grid, comps["u"]),
            leray_project(grid, comps["m"]),
            gradient_part(grid, comps["r"]),
        )

    def _build_component(self, grid: Grid, spec: dict, key: str,
                         seed_offset: int) -> np.ndarray:
        kind = spec.get("kind", "zero")
        amplitude = float(spec.get("amplitude", 1.0))
        if kind == "zero":
            return field_ops.zero_vector(grid)
        if kind == "taylor-green":
            return field_ops.taylor_green(grid, amplitude)
        if kind == "random-band":
            rng = np.random.default_rng(self.seed + 7919 * seed_offset)
            kmax = int(spec.get("kmax", max(1, grid.dealias_kmax - 1)))
            _require(1 <= kmax <= grid.dealias_kmax, f"{key}.kmax",
                     f"must lie in [1, {grid.dealias_kmax}]")
            norm_s = spec.get("norm_s")
            return field_ops.random_band(
                grid, rng, components=3, kmax=kmax,
                s_decay=float(spec.get("s_decay", 2.0)),
                amplitude=amplitude,
                norm_s=None if norm_s is None else float(norm_s))
        raise ConfigError(f"{key}.kind: unknown preset {kind!r}")

    def build_external_field(self, grid: Grid) -> ExternalField:
        spec = self.raw.get("external_field", {})
        modes = []
        for i, mode in enumerate(spec.get("modes", [])):
            key = f"external_field.modes[{i}]"
            kvec = mode.get("k")
            _require(isinstance(kvec, (list, tuple)) and len(kvec) == 3,
                     f"{key}.k", "must be a 3-vector of integers")
            amp = mode.get("amplitude")
            _require(isinstance(amp, (list, tuple)) and len(amp) == 2,
                     f"{key}.amplitude", "must be [re, im]")
            env_spec = mode.get("envelope", "constant")
            if isinstance(env_spec, str):
                env = Envelope(kind=env_spec)
            else:
                env = Envelope(kind=env_spec.get("kind", "constant"),
                               rate=float(env_spec.get("rate", 1.0)))
            try:
                env.value(0.0)
            except ValueError as exc:
                raise ConfigError(f"{key}.envelope: {exc}") from exc
            try:
                modes.append((tuple(int(c) for c in kvec),
                              complex(float(amp[0]), float(amp[1])), env))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key}: {exc}") from exc
        try:
            return ExternalField(grid, modes)
        except ValueError as exc:
            raise ConfigError(f"external_field.modes: {exc}") from exc

    # -- sweep / verify sections -------------------------------------------

    def sweep_options(self) -> dict:
        spec = self.raw.get("sweep", {})
        taus = spec.get("tau_list")
        _require(isinstance(taus, (list, tuple)) and len(taus) >= 2,
                 "sweep.tau_list", "must list at least two relaxation times")
        taus = [float(t) for t in taus]
        _require(all(t > 0 for t in taus), "sweep.tau_list",
                 "entries must be > 0")
        _require(all(b < a for a, b in zip(taus, taus[1:])),
                 "sweep.tau_list", "must be strictly decreasing")
        return {
            "tau_list": taus,
            "h_target": float(spec.get("h_target", 1e-2)),
            "min_reduction": float(spec.get("min_reduction", 10.0)),
        }

    def verify_options(self) -> dict:
        spec = self.raw.get("verify", {})
        known = {"parabolic", "multiplier", "damping"}
        chosen = spec.get("experiments", sorted(known))
        _require(isinstance(chosen, (list, tuple)) and chosen,
                 "verify.experiments", "must be a non-empty list")
        bad = [e for e in chosen if e not in known]
        _require(not bad, "verify.experiments",
                 f"unknown experiments {bad}; known: {sorted(known)}")
        trials = int(spec.get("trials", 24))
        _require(trials >= 20, "verify.trials", "must be >= 20")
        return {"experiments": list(chosen), "trials": trials}

    def simulate_options(self) -> dict:
        spec = self.raw.get("simulate", {})
        return {"write_checkpoints": bool(spec.get("write_checkpoints", False))}


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: not valid YAML: {exc}") from exc
    _require(isinstance(raw, dict), "config", "top level must be a mapping")
    _require(raw.get("version") == CONFIG_VERSION, "version",
             f"must be {CONFIG_VERSION}")
    seed = raw.get("seed", 0)
    _require(isinstance(seed, int) and seed >= 0, "seed",
             "must be a nonnegative integer")
    cfg = RunConfig(raw=raw, seed=seed,
                    output_dir=str(raw.get("output_dir", "out")))
    # validate eagerly so errors surface before any work starts
    grid = cfg.build_grid()
    cfg.build_params()
    cfg.build_time_grid()
    _ = cfg.eps_fraction
    cfg.build_external_field(grid)
    return cfg
