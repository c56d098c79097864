"""Experiment configuration: TOML files, ``key=value`` overrides, presets."""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_override",
           "PRESETS", "preset_configs"]

MODELS = ("qbm", "spin-boson")

_GRID_DEFAULTS = {"qbm": (30000.0, 6001), "spin-boson": (6000.0, 6001)}
_TEMPERATURE_DEFAULTS = {"qbm": 0.0, "spin-boson": 0.2}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One run of either solver.

    ``t_stop``, ``t_points`` and ``temperature`` default per model; the
    temperature must be positive for the spin-boson model. ``initial`` is
    ``"wave_packet"`` or ``"ground"`` for the oscillator and ``"excited"``
    or ``"ground"`` for the qubit.
    """

    model: str
    name: str = "run"
    omega0: float = 1.0
    epsilon: float = 1.0
    gamma: float = 0.001
    cutoff: float = 10.0
    temperature: float | None = None
    initial: str | None = None
    delta: float = 0.01
    n_k: int = 30
    n_c: int = 2
    rtol: float = 1e-8
    atol: float = 1e-10
    method: str = "krylov"
    terminator: bool = True
    scaled: bool = True
    t_start: float = 0.0
    t_stop: float | None = None
    t_points: int | None = None
    log_base: str = "e"
    check_convergence: bool = False
    convergence_threshold: float = 1e-4

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got "
                              f"{self.model!r}")
        stop, points = _GRID_DEFAULTS[self.model]
        if self.t_stop is None:
            object.__setattr__(self, "t_stop", stop)
        if self.t_points is None:
            object.__setattr__(self, "t_points", points)
        if self.temperature is None:
            object.__setattr__(self, "temperature",
                               _TEMPERATURE_DEFAULTS[self.model])
        if self.initial is None:
            object.__setattr__(self, "initial", "wave_packet"
                               if self.model == "qbm" else "excited")
        self._validate()

    def _validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.name and "/" not in self.name, "name must be a plain file stem")
        need(self.omega0 > 0, "omega0 must be > 0")
        need(self.epsilon > 0, "epsilon must be > 0")
        need(self.gamma >= 0, "gamma must be >= 0")
        need(self.cutoff > 0, "cutoff must be > 0")
        need(self.temperature >= 0, "temperature must be >= 0")
        need(self.delta > 0, "delta must be > 0")
        need(self.t_start >= 0, "t_start must be >= 0")
        need(self.t_stop > self.t_start, "t_stop must exceed t_start")
        need(int(self.t_points) == self.t_points and self.t_points >= 2,
             "t_points must be an integer >= 2")
        need(self.log_base in ("e", "2"), "log_base must be 'e' or '2'")
        need(self.rtol > 0 and self.atol > 0, "tolerances must be > 0")
        need(self.convergence_threshold > 0,
             "convergence_threshold must be > 0")
        if self.model == "qbm":
            need(self.initial in ("wave_packet", "ground"),
                 "qbm initial state must be 'wave_packet' or 'ground'")
        else:
            need(self.temperature > 0,
                 "the spin-boson solver needs temperature > 0")
            need(self.initial in ("excited", "ground"),
                 "spin-boson initial state must be 'excited' or 'ground'")
            need(self.n_k >= 1 and self.n_c >= 0, "need n_k >= 1, n_c >= 0")
            need(self.method in ("krylov", "RK45", "DOP853"),
                 "method must be krylov, RK45 or DOP853")

    @property
    def base(self) -> float:
        return np.e if self.log_base == "e" else 2.0

    def time_grid(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_stop, int(self.t_points))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {unknown}")
        if "model" not in data:
            raise ConfigError("configuration must set 'model'")
        try:
            return cls(**{k: _coerce(known[k], v) for k, v in data.items()})
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


_INT_KEYS = {"n_k", "n_c", "t_points"}
_BOOL_KEYS = {"terminator", "scaled", "check_convergence"}
_STR_KEYS = {"model", "name", "initial", "method", "log_base"}


def _coerce(f, value):
    if f.name in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ConfigError(f"{f.name} must be true or false")
        return value
    if f.name in _STR_KEYS:
        return str(value)
    if f.name in _INT_KEYS:
        if isinstance(value, bool) or int(value) != value:
            raise ConfigError(f"{f.name} must be an integer")
        return int(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{f.name} must be a number, got {value!r}")
    return float(value)


def parse_override(text: str) -> tuple[str, object]:
    """Split ``key=value``; the value is read as a TOML scalar when possible
    and kept as a bare string otherwise."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = (s.strip() for s in text.split("=", 1))
    if not key:
        raise ConfigError(f"override {text!r} has an empty key")
    return key, parse_value(raw)


def parse_value(raw: str):
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def load_config(path: str | Path | None, overrides=(), model: str | None = None
                ) -> ExperimentConfig:
    data: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if model is not None:
        data["model"] = model
    for item in overrides:
        key, value = parse_override(item)
        data[key] = value
    return ExperimentConfig.from_mapping(data)


_FIG1 = ExperimentConfig(model="qbm", omega0=1.0, gamma=0.001, cutoff=10.0,
                         temperature=0.0)
_FIG3 = ExperimentConfig(model="spin-boson", epsilon=1.0, gamma=0.001,
                         cutoff=10.0, temperature=0.2)

PRESETS = {
    "fig1": [
        _FIG1.replace(name="fig1_delta_0.01", delta=0.01),
        _FIG1.replace(name="fig1_delta_0.001", delta=0.001),
        _FIG1.replace(name="fig1_inset_ground", initial="ground"),
    ],
    "fig2": [
        *[_FIG1.replace(name=f"fig2_top_T_{T:g}", temperature=T)
          for T in (0.0, 0.5, 1.0)],
        *[_FIG1.replace(name=f"fig2_bottom_gamma_{g:g}", gamma=g)
          for g in (0.001, 0.05, 0.1)],
    ],
    "fig3": [_FIG3.replace(name="fig3", check_convergence=True)],
    "fig4": [
        *[_FIG3.replace(name=f"fig4_top_T_{T:g}", temperature=T)
          for T in (0.2, 0.25, 0.3)],
        *[_FIG3.replace(name=f"fig4_bottom_gamma_{g:g}", gamma=g)
          for g in (0.001, 0.0015, 0.002)],
    ],
}


def preset_configs(name: str) -> list[ExperimentConfig]:
    try:
        return list(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from "
                          f"{sorted(PRESETS)}") from None
