"""End-to-end episodes, sweeps and paired allocator comparisons.

Every episode's randomness comes from one seed derived from
``(master, axis value, trial)``; all allocators evaluated on that episode
share it, so their channel, dither, noise and input sample are identical.
"""

import csv
import io
import os
from dataclasses import dataclass, field

import numpy as np

from .. import dppo
from ..alloc import (allocate_bits_eam, allocate_bits_ram, allocate_bits_rbam,
                     weighted_distortion)
from ..importance import compute_str, importance
from ..kb import KnowledgeBase, load_kb
from ..link import realize_link, transmit_analog, transmit_digital
from ..semcodec import (SyntheticDataset, cross_entropy, encode, generate_dataset, task_logits,
                        train_codec)
from ..seeds import derive_seed
from .config import AXES, ConfigError, ExperimentConfig

SWEEP_HEADER = ["axis", "value", "allocator", "trials", "distortion_mean", "distortion_std",
                "accuracy_mean", "accuracy_std", "reward_mean", "chest_mse_mean"]
DPPO_VARIANTS = ("dppo", "dppo_simplified")


@dataclass
class Artifacts:
    """Trained codec, stored task relevance, policies and the data splits."""
    codec: object
    g: np.ndarray
    train: SyntheticDataset
    test: SyntheticDataset
    policies: dict = field(default_factory=dict)

    def knowledge_base(self) -> KnowledgeBase:
        return KnowledgeBase(self.codec, self.g, dict(self.policies))


@dataclass
class EpisodeResult:
    allocator: str
    weighted_distortion: float
    top1_correct: bool
    reward: float
    bits_used: int
    bits: np.ndarray
    seeds: dict
    chest_mse: float = float("nan")
    coded_bits: int = 0
    pad_bits: int = 0
    failed_stage: str = None

    @property
    def ok(self) -> bool:
        return self.failed_stage is None


class EpisodeFailure(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage


def make_data(cfg: ExperimentConfig):
    ds = generate_dataset(cfg.n_samples, cfg.d, cfg.N, derive_seed(cfg.seed, "data"),
                          noise_std=cfg.noise_std, radius_factor=cfg.radius_factor)
    return ds.split(cfg.n_train)


def build_artifacts(cfg: ExperimentConfig) -> Artifacts:
    """Generate data, train the codec and compute its task relevance."""
    train, test = make_data(cfg)
    codec = train_codec(train, epochs=cfg.codec_epochs, lr=cfg.codec_lr,
                        seed=derive_seed(cfg.seed, "codec"), shape=cfg.shape, hidden=cfg.hidden)
    g = compute_str(codec, encode(train.inputs[: cfg.str_samples], codec))
    return Artifacts(codec, g, train, test)


def load_artifacts(cfg: ExperimentConfig, require_kb: bool = False) -> Artifacts:
    """Codec and policies from ``cfg.kb`` if it exists, else trained afresh."""
    if cfg.kb and os.path.exists(cfg.kb):
        kb = load_kb(cfg.kb)
        if kb.codec is None:
            raise ConfigError(f"{cfg.kb} holds no codec section")
        if tuple(kb.codec.shape) != cfg.shape or kb.codec.input_dim != cfg.d:
            raise ConfigError(f"codec in {cfg.kb} has shape {kb.codec.shape}, config wants {cfg.shape}")
        train, test = make_data(cfg)
        g = kb.g if kb.g is not None else compute_str(kb.codec, encode(train.inputs[: cfg.str_samples], kb.codec))
        return Artifacts(kb.codec, g, train, test, dict(kb.policies))
    if require_kb:
        raise ConfigError(f"knowledge-base file {cfg.kb!r} not found")
    return build_artifacts(cfg)


def train_policy(cfg: ExperimentConfig, art: Artifacts, variant: str = "dppo", callback=None):
    """Train one DPPO variant on the training split and store it in ``art``."""
    hyper = cfg.hyper(use_isr=(variant == "dppo"))
    res = dppo.train(art.codec, art.g, art.train, cfg.link(), hyper, cfg.B,
                     iterations=cfg.dppo_iterations, callback=callback)
    art.policies[variant] = res.params
    return res


# ------------------------------------------------------------------ episodes

def _sample(art: Artifacts, sample):
    if isinstance(sample, (int, np.integer)):
        return art.test.inputs[sample], int(art.test.labels[sample])
    x, label = sample
    return np.asarray(x, dtype=float), int(label)


def _allocate(name, cfg, art, A, omega, seed):
    C = A.shape[0]
    if name == "eam":
        return allocate_bits_eam(cfg.B, C, omega).b
    if name == "rbam":
        return allocate_bits_rbam(omega, cfg.B).b
    if name == "ram":
        return allocate_bits_ram(cfg.B, C, derive_seed(seed, "ram")).b
    if name in DPPO_VARIANTS:
        if name not in art.policies:
            raise ConfigError(f"no trained policy for {name!r}; run train-dppo first")
        order = dppo.visiting_order(omega, cfg.hyper().order)
        return dppo.infer_allocation(art.policies[name], A, omega, cfg.B, order).b
    raise ConfigError(f"unknown allocator {name!r}")


def _stage(name, fn, *args):
    try:
        return fn(*args)
    except ConfigError:
        raise
    except Exception as exc:  # noqa: BLE001 - tag and re-raise with the stage
        raise EpisodeFailure(name, exc) from exc


def run_episode(cfg: ExperimentConfig, art: Artifacts, sample, allocator: str, seed) -> EpisodeResult:
    """One transmission of one input with one allocator.

    Distortion is always weighted with the full importance (task and
    inter-feature relevance) so allocators are scored on the same metric,
    whatever weights they used to decide.
    """
    if allocator == "analog_baseline":
        return run_analog_baseline(cfg, art, sample, seed)
    seeds = {"episode": int(seed)}
    try:
        x, label = _sample(art, sample)
        A = _stage("encode", encode, x, art.codec)
        w_full = _stage("importance", lambda: importance(A, art.g).omega)
        w = w_full if allocator != "dppo_simplified" else importance(A, art.g, use_isr=False).omega
        real = _stage("channel", realize_link, cfg.link(), A.shape[0], int(np.prod(A.shape[1:])), seed)
        assign = _stage("subcarriers", real.assignment, w)
        b = _stage("allocate", _allocate, allocator, cfg, art, A, w, seed)
        if b.sum() > cfg.B or np.any(b < 1):
            raise EpisodeFailure("allocate", ValueError(f"infeasible allocation {b}"))
        res = _stage("transmit", transmit_digital, A, b, assign, real)
        logits = _stage("task", task_logits, res.features, art.codec)
    except EpisodeFailure as exc:
        return EpisodeResult(allocator, float("nan"), False, float("nan"), 0, np.zeros(0, int),
                             seeds, failed_stage=exc.stage)
    d = weighted_distortion(A, res.features, w_full)
    L = -float(cross_entropy(logits, label)[0])
    return EpisodeResult(allocator, d, bool(np.argmax(logits) == label), cfg.L0 + L - cfg.beta * d,
                         res.bits_used, b, seeds, res.chest_mse, res.coded_bits, res.pad_bits)


def run_analog_baseline(cfg: ExperimentConfig, art: Artifacts, sample, seed) -> EpisodeResult:
    """Uncoded analog transmission of the same features over the same channel."""
    seeds = {"episode": int(seed)}
    try:
        x, label = _sample(art, sample)
        A = _stage("encode", encode, x, art.codec)
        w = _stage("importance", lambda: importance(A, art.g).omega)
        real = _stage("channel", realize_link, cfg.link(), A.shape[0], int(np.prod(A.shape[1:])), seed)
        assign = _stage("subcarriers", real.assignment, w) if cfg.link().uses_ofdm else None
        res = _stage("transmit", transmit_analog, A, real, assign)
        logits = _stage("task", task_logits, res.features, art.codec)
    except EpisodeFailure as exc:
        return EpisodeResult("analog_baseline", float("nan"), False, float("nan"), 0,
                             np.zeros(0, int), seeds, failed_stage=exc.stage)
    d = weighted_distortion(A, res.features, w)
    L = -float(cross_entropy(logits, label)[0])
    return EpisodeResult("analog_baseline", d, bool(np.argmax(logits) == label),
                         cfg.L0 + L - cfg.beta * d, 0, np.zeros(A.shape[0], int), seeds, res.chest_mse)


def episode_plan(cfg: ExperimentConfig, n_test: int, value=None):
    """``(trial, test index, episode seed)`` for every trial at one sweep point."""
    key = () if value is None else (cfg.axis, repr(value))
    out = []
    for t in range(cfg.trials):
        seed = derive_seed(cfg.seed, *key, t)
        out.append((t, int(derive_seed(seed, "sample") % n_test), seed))
    return out


# -------------------------------------------------------------------- sweeps

def _fmt(x) -> str:
    return "nan" if not np.isfinite(x) else f"{x:.6f}"


def _axis_config(cfg: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    field_name = AXES[axis]
    change = {field_name: type(getattr(cfg, field_name))(value)}
    if axis == "n_paths":
        change["channel"] = "multipath"
    elif axis == "bsc_p":
        change["channel"] = "bsc"
    try:
        return cfg.replace(**change)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad {axis} value {value!r}: {exc}") from exc


def _check_allocators(cfg, art, allocators):
    for a in allocators:
        if a in DPPO_VARIANTS and a not in art.policies:
            raise ConfigError(f"no trained policy for {a!r}; run train-dppo first")


def _summary_row(axis, value, name, results):
    ok = [r for r in results if r.ok]
    d = np.array([r.weighted_distortion for r in ok])
    acc = np.array([r.top1_correct for r in ok], dtype=float)
    rew = np.array([r.reward for r in ok])
    ch = np.array([r.chest_mse for r in ok])
    ch = ch[np.isfinite(ch)]
    mean = lambda v: float(v.mean()) if v.size else float("nan")
    std = lambda v: float(v.std()) if v.size else float("nan")
    return [axis, repr(value) if not isinstance(value, str) else value, name, str(len(ok)),
            _fmt(mean(d)), _fmt(std(d)), _fmt(mean(acc)), _fmt(std(acc)), _fmt(mean(rew)),
            _fmt(mean(ch))]


def run_sweep(cfg: ExperimentConfig, art: Artifacts = None, allocators=None, out_path=None):
    """Sweep ``cfg.axis`` over ``cfg.values``; returns ``(csv_text, results)``.

    ``results[(value, allocator)]`` holds the per-episode results.
    """
    if cfg.axis not in AXES:
        raise ConfigError(f"invalid sweep axis {cfg.axis!r}; choose from {tuple(AXES)}")
    if not cfg.values:
        raise ConfigError("sweep needs at least one value")
    allocators = tuple(allocators or cfg.allocators)
    points = [_axis_config(cfg, cfg.axis, v) for v in cfg.values]
    art = art or load_artifacts(cfg)
    _check_allocators(cfg, art, allocators)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    results = {}
    for value, pcfg in zip(cfg.values, points):
        per = {a: [] for a in allocators}
        for _, idx, seed in episode_plan(cfg, len(art.test), value):
            for a in allocators:
                per[a].append(run_episode(pcfg, art, idx, a, seed))
        for a in allocators:
            results[(value, a)] = per[a]
            w.writerow(_summary_row(cfg.axis, value, a, per[a]))
    text = buf.getvalue()
    if out_path:
        with open(out_path, "w", newline="") as fh:
            fh.write(text)
    return text, results


def compare_allocators(cfg: ExperimentConfig, art: Artifacts = None, allocators=None, out_path=None):
    """Paired comparison on ``cfg.trials`` episodes at the config's operating point.

    Returns ``(csv_text, results)``.  The CSV has one row per allocator with
    mean distortion and accuracy plus the fraction of episodes on which it
    had strictly lower distortion than each other allocator (ties count 1/2).
    """
    allocators = tuple(allocators or cfg.allocators)
    art = art or load_artifacts(cfg)
    _check_allocators(cfg, art, allocators)
    results = {a: [] for a in allocators}
    for _, idx, seed in episode_plan(cfg, len(art.test)):
        for a in allocators:
            results[a].append(run_episode(cfg, art, idx, a, seed))
    d = {a: np.array([r.weighted_distortion for r in results[a]]) for a in allocators}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["allocator", "episodes", "distortion_mean", "distortion_se", "accuracy_mean",
                "reward_mean"] + [f"win_vs_{b}" for b in allocators])
    for a in allocators:
        ok = np.isfinite(d[a])
        acc = np.mean([r.top1_correct for r in results[a]])
        rew = np.nanmean([r.reward for r in results[a]])
        wins = []
        for b in allocators:
            both = ok & np.isfinite(d[b])
            if not both.any():
                wins.append(float("nan"))
                continue
            x, y = d[a][both], d[b][both]
            wins.append(float(np.mean((x < y) + 0.5 * (x == y))))
        se = d[a][ok].std() / np.sqrt(max(ok.sum(), 1))
        w.writerow([a, str(int(ok.sum())), _fmt(d[a][ok].mean()), _fmt(se), _fmt(acc), _fmt(rew)]
                   + [_fmt(v) for v in wins])
    text = buf.getvalue()
    if out_path:
        with open(out_path, "w", newline="") as fh:
            fh.write(text)
    return text, results


def export_importance_map(cfg: ExperimentConfig, art: Artifacts, sample=0, allocator=None,
                          out_path=None) -> str:
    """Per-semantic ``g, v, omega`` and allocated bits for one test input."""
    allocator = allocator or cfg.allocator
    if allocator == "analog_baseline":
        raise ConfigError("the analog baseline allocates no bits")
    x, _ = _sample(art, sample)
    A = encode(x, art.codec)
    iw = importance(A, art.g)
    w = iw.omega if allocator != "dppo_simplified" else importance(A, art.g, use_isr=False).omega
    b = _allocate(allocator, cfg, art, A, w, derive_seed(cfg.seed, "export"))
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["semantic", "g", "v", "omega", "bits"])
    for k in range(A.shape[0]):
        wr.writerow([k, repr(float(iw.g[k])), repr(float(iw.v[k])), repr(float(iw.omega[k])), int(b[k])])
    text = buf.getvalue()
    if out_path:
        with open(out_path, "w", newline="") as fh:
            fh.write(text)
    return text


def write_training_curve(curve, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "mean_reward", "loss", "entropy"])
        for row in curve:
            w.writerow([row["iteration"], repr(row["mean_reward"]), repr(row["loss"]),
                        repr(row["entropy"])])
