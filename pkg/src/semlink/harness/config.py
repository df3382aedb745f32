"""Experiment configuration: defaults per profile, JSON loading, validation.

A config file is a JSON object.  Keys may be flat (``"snr_db": 4``),
dotted (``"channel.snr_db": 4``) or nested by section
(``{"channel": {"snr_db": 4}}``); the section name is only a grouping aid.
The ``dppo`` section is the exception: its keys are forwarded verbatim to
:class:`semlink.dppo.DppoHyper`.
"""

import dataclasses
import json
from dataclasses import dataclass, field

from ..dppo import DppoHyper
from ..link import CHANNEL_MODELS, ESTIMATORS, LinkConfig
from ..phy import ChannelCode, OfdmConfig

ALLOCATORS = ("dppo", "dppo_simplified", "eam", "rbam", "ram", "analog_baseline")
AXES = {"snr_db": "snr_db", "n_paths": "n_paths", "n_pilots": "n_pilot",
        "budget": "B", "bsc_p": "bsc_p"}
SECTIONS = ("codec", "data", "ofdm", "channel", "alloc", "sweep", "run")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    profile: str = "desk"
    seed: int = 0
    # codec and synthetic data
    C: int = 64
    W: int = 2
    H: int = 2
    N: int = 10
    d: int = 32
    n_samples: int = 2000
    n_train: int = 1500
    hidden: int = 64
    codec_epochs: int = 400
    codec_lr: float = 0.5
    noise_std: float = 1.0
    radius_factor: float = 4.0
    str_samples: int = 200
    # link
    n_sub: int = 272
    n_pilot: int = 16
    cp_len: int = 72
    channel: str = "sui5"
    n_paths: int = 3
    snr_db: float = 10.0
    bsc_p: float = 0.0
    code: str = "identity"
    estimator: str = "mmse"
    analog_mode: str = "single_carrier"
    # allocation and reward
    B: int = 128
    allocator: str = "eam"
    allocators: tuple = ("eam", "rbam", "ram")
    beta: float = 0.5
    L0: float = 10.0
    # sweeps
    axis: str = None
    values: tuple = ()
    trials: int = 200
    # training
    dppo_iterations: int = 500
    dppo: dict = field(default_factory=dict)
    # files
    out: str = "out"
    kb: str = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}")
        for name in ("C", "W", "H", "N", "d", "n_samples", "trials", "n_sub", "n_pilot"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.n_train < self.n_samples:
            raise ConfigError("n_train must leave a non-empty test split")
        if self.C < 2:
            raise ConfigError("need at least two feature maps")
        if self.B < self.C:
            raise ConfigError(f"budget B={self.B} is smaller than C={self.C}")
        if self.channel not in CHANNEL_MODELS:
            raise ConfigError(f"unknown channel {self.channel!r}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if not 0 <= self.bsc_p <= 1:
            raise ConfigError("bsc_p must lie in [0, 1]")
        for a in (self.allocator,) + tuple(self.allocators):
            if a not in ALLOCATORS:
                raise ConfigError(f"unknown allocator {a!r}; choose from {ALLOCATORS}")
        if self.axis is not None and self.axis not in AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}; choose from {tuple(AXES)}")
        try:
            ChannelCode(self.code)
            OfdmConfig(self.n_sub, self.n_pilot, self.cp_len)
            self.hyper()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def shape(self) -> tuple:
        return (self.C, self.W, self.H)

    def link(self) -> LinkConfig:
        return LinkConfig(OfdmConfig(self.n_sub, self.n_pilot, self.cp_len), self.channel,
                          self.n_paths, self.snr_db, self.bsc_p, ChannelCode(self.code),
                          self.estimator, 1.0, self.analog_mode)

    def hyper(self, **over) -> DppoHyper:
        kw = dict(DPPO_DEFAULTS, beta=self.beta, L0=self.L0, seed=self.seed)
        kw.update(self.dppo)
        kw.update(over)
        if "hidden" in kw:
            kw["hidden"] = tuple(kw["hidden"])
        return DppoHyper(**kw)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}


# DPPO settings used unless a config overrides them: even provisional fill,
# per-episode reward baseline and 16 episodes per update.
DPPO_DEFAULTS = {"fill": "even", "episode_baseline": True, "batch_episodes": 16}

PROFILES = {
    "desk": {},
    "full": {"C": 512, "d": 128, "n_samples": 6000, "n_train": 5000, "hidden": 256, "B": 1100,
             "values": ()},
}

_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}
_TUPLES = {"allocators", "values"}


def _flatten(raw: dict, prefix: str = "") -> dict:
    out = {}
    for key, val in raw.items():
        if not isinstance(key, str):
            raise ConfigError(f"config keys must be strings, got {key!r}")
        if key == "dppo" and isinstance(val, dict):
            out.setdefault("dppo", {}).update(val)
            continue
        if "." in key:
            head, rest = key.split(".", 1)
            if head == "dppo":
                out.setdefault("dppo", {})[rest] = val
                continue
            if head not in SECTIONS:
                raise ConfigError(f"unknown config section {head!r}")
            out.update(_flatten({rest: val}))
            continue
        if isinstance(val, dict):
            if key not in SECTIONS:
                raise ConfigError(f"unknown config section {key!r}")
            out.update(_flatten(val))
            continue
        out[key] = val
    return out


def make_config(overrides: dict = None, profile: str = None) -> ExperimentConfig:
    """Build a config from profile defaults plus (possibly nested) overrides."""
    flat = _flatten(overrides or {})
    profile = profile or flat.get("profile", "desk")
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    kw = dict(PROFILES[profile], profile=profile)
    kw.update({k: v for k, v in flat.items() if k != "profile"})
    unknown = set(kw) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for k in _TUPLES & set(kw):
        kw[k] = tuple(kw[k])
    try:
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, profile: str = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    return make_config(raw, profile)
