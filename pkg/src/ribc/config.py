"""Run configuration: JSON file plus command-line overrides, validated up front."""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .core import ConfidenceProfile
from .experiments import ExperimentConfig
from .interaction import InteractionModel

MODES = ("simulate", "cibc", "bounds", "montecarlo", "verify")
FORMATS = ("csv", "json")
INITS = ("explicit", "uniform_ball", "corollary2")
OUT_ENV = "RIBC_OUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str
    n: int | None = None
    d: int = 1
    bounds: list | None = None
    model: dict | None = None
    init: str = "uniform_ball"
    opinions: list | None = None
    eps_eq: float | None = None  # None -> 0 for cibc, 1e-9 otherwise
    trials: int = 1
    max_steps: int = 100_000
    seed: int = 0
    decimate: int = 1
    out: str | None = None
    format: str = "csv"
    workers: int = 1
    scale: str = "quick"

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def experiment(self, trials: int | None = None, keep_trajectory: bool = False) -> ExperimentConfig:
        return ExperimentConfig(
            n=self.n,
            d=self.d,
            bounds=list(self.bounds),
            model=build_model(self.model, self.n),
            init=self.init,
            opinions=self.opinions,
            eps_eq=self.eps_eq,
            trials=self.trials if trials is None else trials,
            max_steps=self.max_steps,
            master_seed=self.seed,
            decimate=self.decimate,
            keep_trajectory=keep_trajectory,
        )

    @property
    def out_dir(self) -> Path:
        return Path(self.out)


_MODEL_RE = re.compile(r"^\s*(er|uniform)\s*(?:\(\s*([^)]*)\s*\))?\s*$")


def normalize_model(spec) -> dict:
    """Accept ``{"kind": "er", "p": 0.5}``, ``"er(0.5)"`` or ``"uniform"``."""
    if isinstance(spec, str):
        m = _MODEL_RE.match(spec)
        if not m:
            raise ConfigError(f"model: cannot parse {spec!r}; use er(p), uniform or a mapping")
        kind, arg = m.groups()
        if kind == "er":
            if not arg:
                raise ConfigError("model: er needs an edge probability, e.g. er(0.5)")
            return {"kind": "er", "p": float(arg)}
        return {"kind": "uniform"}
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("model: expected a mapping with a 'kind' key")
    allowed = {"er": {"kind", "p"}, "pair": {"kind", "P"}, "uniform": {"kind"}}
    kind = spec["kind"]
    if kind not in allowed:
        raise ConfigError(f"model.kind: unknown model {kind!r} (er, pair, uniform)")
    extra = set(spec) - allowed[kind]
    if extra:
        raise ConfigError(f"model: unknown keys {sorted(extra)} for kind {kind!r}")
    out = dict(spec)
    if kind == "er":
        out["p"] = float(out["p"])
    return out


def build_model(spec: dict, n: int) -> InteractionModel:
    if spec["kind"] == "er":
        return InteractionModel("er", n, p=spec["p"])
    if spec["kind"] == "pair":
        return InteractionModel("pair", n, P=np.asarray(spec["P"], dtype=float))
    return InteractionModel("uniform", n)


def _validate(cfg: RunConfig) -> RunConfig:
    if cfg.mode not in MODES:
        raise ConfigError(f"mode: unknown mode {cfg.mode!r} (choose from {', '.join(MODES)})")
    if cfg.format not in FORMATS:
        raise ConfigError(f"format: must be one of {FORMATS}")
    if cfg.scale not in ("quick", "full"):
        raise ConfigError("scale: must be 'quick' or 'full'")
    for name in ("trials", "max_steps", "decimate", "workers", "d"):
        if int(getattr(cfg, name)) < 1:
            raise ConfigError(f"{name}: must be at least 1")
    if cfg.eps_eq is None:
        cfg.eps_eq = 0.0 if cfg.mode == "cibc" else 1e-9
    if cfg.eps_eq < 0:
        raise ConfigError("eps_eq: must be nonnegative")
    if cfg.out is None:
        cfg.out = os.environ.get(OUT_ENV, "ribc-out")
    if cfg.mode == "verify":
        return cfg

    if cfg.bounds is None:
        raise ConfigError("bounds: required")
    try:
        profile = ConfidenceProfile(cfg.bounds)
    except ValueError as exc:
        raise ConfigError(f"bounds: {exc}") from None
    cfg.bounds = [float(b) for b in cfg.bounds]
    if cfg.n is None:
        cfg.n = profile.n
    if profile.n != cfg.n:
        raise ConfigError(f"bounds: {profile.n} values given for n={cfg.n}")
    if cfg.n < 3 and cfg.mode != "cibc":
        raise ConfigError("n: at least 3 agents are required")
    if cfg.mode == "bounds":
        if not profile.r_min < 2:
            raise ConfigError("bounds: the smallest confidence bound must be below 2 for the step bounds")
        if cfg.model is not None:
            cfg.model = normalize_model(cfg.model)
            _check_model(cfg)
        return cfg

    if cfg.init not in INITS:
        raise ConfigError(f"init: must be one of {INITS}")
    if cfg.init == "explicit":
        if cfg.opinions is None:
            raise ConfigError("opinions: required when init is 'explicit'")
        x = np.asarray(cfg.opinions, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape != (cfg.n, cfg.d):
            raise ConfigError(f"opinions: expected shape ({cfg.n}, {cfg.d}), got {x.shape}")
        cfg.opinions = x.tolist()
    elif cfg.opinions is not None:
        raise ConfigError("opinions: only allowed when init is 'explicit'")
    if cfg.init == "corollary2" and not profile.r_max < 2:
        raise ConfigError("init: the separated start needs the largest bound below 2")

    if cfg.mode == "cibc":
        return cfg
    if cfg.model is None:
        raise ConfigError("model: required")
    cfg.model = normalize_model(cfg.model)
    _check_model(cfg)
    return cfg


def _check_model(cfg: RunConfig):
    try:
        build_model(cfg.model, cfg.n)
    except ValueError as exc:
        msg = str(exc)
        if cfg.model["kind"] == "er":
            msg += "; every edge subset needs positive probability, so p must be in (0, 1)"
        raise ConfigError(f"model: {msg}") from None


def from_dict(data: dict, mode: str | None = None) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data = dict(data)
    if mode is not None:
        data["mode"] = mode
    if "mode" not in data:
        raise ConfigError("mode: required")
    return _validate(RunConfig(**data))


def parse_config(path=None, mode: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Load ``path`` (JSON), apply non-None ``overrides`` and validate."""
    data = {}
    if path is not None:
        p = Path(path)
        try:
            data = json.loads(p.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {p}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{p}: top level must be a mapping")
    for k, v in (overrides or {}).items():
        if v is not None:
            data[k] = v
    return from_dict(data, mode)


def echo(cfg: RunConfig) -> str:
    """Canonical JSON of the resolved config, defaults included."""
    return json.dumps(cfg.to_dict(), indent=2)
