"""Subcarrier matching, baseline bit allocators and the link objective."""

from dataclasses import dataclass

import numpy as np


@dataclass
class SubcarrierAssignment:
    rho: np.ndarray        # semantic -> data-subcarrier index
    frame_id: np.ndarray   # semantic -> frame number

    def validate(self):
        for f in np.unique(self.frame_id):
            sc = self.rho[self.frame_id == f]
            if np.unique(sc).size != sc.size:
                raise ValueError(f"frame {f}: two semantics share a subcarrier")


@dataclass
class BitAllocation:
    b: np.ndarray
    budget: int

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=np.int64)

    @property
    def used(self) -> int:
        return int(self.b.sum())

    def is_feasible(self) -> bool:
        return bool(np.all(self.b >= 1) and self.b.sum() <= self.budget)


def _omega(omega):
    return np.asarray(getattr(omega, "omega", omega), dtype=float)


def importance_rank(omega) -> np.ndarray:
    """Semantic indices by descending importance, ties to the lower index."""
    return np.argsort(-_omega(omega), kind="stable")


def allocate_subcarriers(omega, gains) -> SubcarrierAssignment:
    """Pair the i-th most important semantic with the i-th strongest subcarrier."""
    w = _omega(omega)
    gains = np.asarray(gains, dtype=float)
    if w.size > gains.size:
        raise ValueError(f"{w.size} semantics cannot share {gains.size} subcarriers one-to-one")
    sem_order = importance_rank(w)
    sc_order = np.argsort(-gains, kind="stable")
    rho = np.empty(w.size, dtype=np.int64)
    rho[sem_order] = sc_order[: w.size]
    return SubcarrierAssignment(rho, np.zeros(w.size, dtype=np.int64))


def allocate_subcarriers_framed(omega, gains) -> SubcarrierAssignment:
    """Split semantics into frames of at most ``len(gains)`` by importance rank
    and match each frame independently."""
    w = _omega(omega)
    n_sc = len(gains)
    rank = importance_rank(w)
    rho = np.empty(w.size, dtype=np.int64)
    frame = np.empty(w.size, dtype=np.int64)
    for f, start in enumerate(range(0, w.size, n_sc)):
        members = rank[start:start + n_sc]
        sub = allocate_subcarriers(w[members], gains)
        rho[members] = sub.rho
        frame[members] = f
    return SubcarrierAssignment(rho, frame)


def _check_budget(B, C):
    if B < C:
        raise ValueError(f"budget {B} cannot give each of {C} semantics one bit")


def allocate_bits_eam(B: int, C: int, omega=None) -> BitAllocation:
    """Even split; the ``B mod C`` leftover bits go to the most important semantics."""
    _check_budget(B, C)
    b = np.full(C, B // C, dtype=np.int64)
    extra = B % C
    order = importance_rank(omega) if omega is not None else np.arange(C)
    b[order[:extra]] += 1
    return BitAllocation(b, B)


def allocate_bits_rbam(omega, B: int) -> BitAllocation:
    """Importance-proportional split with one reserved bit per semantic.

    Each semantic gets one bit; the remaining ``B - C`` are apportioned by
    ``omega`` with the largest-remainder method (ties to the lower index).
    """
    w = _omega(omega)
    C = w.size
    _check_budget(B, C)
    share = (B - C) * w / w.sum()
    base = np.floor(share).astype(np.int64)
    left = (B - C) - int(base.sum())
    frac = share - base
    order = np.argsort(-frac, kind="stable")
    base[order[:left]] += 1
    return BitAllocation(base + 1, B)


def allocate_bits_ram(B: int, C: int, seed) -> BitAllocation:
    """Uniformly random composition of ``B`` into ``C`` positive parts."""
    _check_budget(B, C)
    rng = np.random.default_rng(seed)
    cuts = np.sort(rng.choice(np.arange(1, B), size=C - 1, replace=False)) if C > 1 else np.array([], int)
    edges = np.concatenate([[0], cuts, [B]])
    return BitAllocation(np.diff(edges), B)


def weighted_distortion(A, A_rec, omega, rho=None) -> float:
    """Importance-weighted squared error summed over every map entry."""
    A = np.asarray(A, dtype=float)
    A_rec = np.asarray(A_rec, dtype=float)
    if A.shape != A_rec.shape:
        raise ValueError("original and recovered features differ in shape")
    w = _omega(omega)
    if w.size != A.shape[0]:
        raise ValueError("one weight per semantic required")
    if rho is not None and len(getattr(rho, "rho", rho)) != A.shape[0]:
        raise ValueError("subcarrier assignment must cover every semantic")
    per_sem = ((A - A_rec) ** 2).reshape(A.shape[0], -1).sum(axis=1)
    return float(w @ per_sem)


def objective(task_perf: float, distortion: float, beta: float = 0.5) -> float:
    return task_perf - beta * distortion
