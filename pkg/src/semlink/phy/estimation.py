"""Pilot-based channel estimation and one-tap equalisation."""

import numpy as np

from .ofdm import OfdmConfig

METHODS = ("ls_interp", "mmse")
RELEASE_FLOOR = 1e-6


def _linear_interp_extrap(x_known, y_known, x):
    """Piecewise-linear interpolation with linear extrapolation at both ends."""
    if x_known.size == 1:
        return np.full(x.shape, y_known[0], dtype=y_known.dtype)
    out = np.interp(x, x_known, y_known.real) + 1j * np.interp(x, x_known, y_known.imag)
    lo = x < x_known[0]
    hi = x > x_known[-1]
    if lo.any():
        slope = (y_known[1] - y_known[0]) / (x_known[1] - x_known[0])
        out[lo] = y_known[0] + slope * (x[lo] - x_known[0])
    if hi.any():
        slope = (y_known[-1] - y_known[-2]) / (x_known[-1] - x_known[-2])
        out[hi] = y_known[-1] + slope * (x[hi] - x_known[-1])
    return out


def _freq_correlation(offsets, delays, powers, n_sub):
    # E[h_k conj(h_l)] for k - l = offsets under independent taps
    return np.exp(-2j * np.pi * offsets[..., None] * delays / n_sub) @ powers


def estimate_channel(pilot_obs, cfg: OfdmConfig, method: str = "ls_interp",
                     noise_var: float = 0.0, delays=None, powers=None) -> np.ndarray:
    """Estimate the frequency response on all ``n_sub`` bins.

    ``mmse`` needs the tap-delay profile (``delays``, ``powers``) of the
    channel model and the noise variance per subcarrier.
    """
    if method not in METHODS:
        raise ValueError(f"unknown estimation method {method!r}")
    obs = np.asarray(pilot_obs, dtype=complex).ravel()
    if obs.size != cfg.n_pilot:
        raise ValueError(f"expected {cfg.n_pilot} pilot observations, got {obs.size}")
    if cfg.pilot_value == 0:
        raise ValueError("pilot_value must be nonzero")
    h_ls = obs / cfg.pilot_value
    pilots = cfg.pilot_index
    order = np.argsort(pilots)
    allk = np.arange(cfg.n_sub)
    if method == "ls_interp":
        return _linear_interp_extrap(pilots[order].astype(float), h_ls[order], allk.astype(float))
    if delays is None or powers is None:
        raise ValueError("mmse estimation needs the channel delay/power profile")
    delays = np.asarray(delays, dtype=float)
    powers = np.asarray(powers, dtype=float)
    r_pp = _freq_correlation(pilots[:, None] - pilots[None, :], delays, powers, cfg.n_sub)
    r_ap = _freq_correlation(allk[:, None] - pilots[None, :], delays, powers, cfg.n_sub)
    reg = noise_var / abs(cfg.pilot_value) ** 2
    w = np.linalg.lstsq(r_pp + reg * np.eye(cfg.n_pilot), h_ls, rcond=None)[0]
    return r_ap @ w


def equalize(data_obs, h_data, floor: float = None) -> np.ndarray:
    """Element-wise zero-forcing ``y / h``.

    Without ``floor`` a near-zero subchannel (below 1e-12) raises; with a floor
    the estimate magnitude is clamped from below, keeping its phase.
    """
    y = np.asarray(data_obs, dtype=complex)
    h = np.asarray(h_data, dtype=complex)
    if y.shape[-1] != h.shape[-1]:
        raise ValueError("data_obs and h_data lengths differ")
    mag = np.abs(h)
    if floor is None:
        if np.any(mag < 1e-12):
            raise ZeroDivisionError("singular subchannel: |h| below 1e-12")
        return y / h
    phase = np.where(mag > 0, h / np.where(mag > 0, mag, 1.0), 1.0)
    return y / (np.maximum(mag, floor) * phase)
