"""End-to-end transmission of quantized feature maps over the simulated link.

``realize_link`` freezes all randomness of one episode (fading taps, dither,
noise and filler seeds) so that different bit allocations can be compared on
exactly the same channel.  ``transmit_digital`` then runs

    dither + quantize -> bits -> channel code -> 64QAM -> OFDM -> channel
    -> estimate / equalize -> demap -> decode -> dequantize

and ``transmit_analog`` sends the raw features as I/Q samples.
"""

from dataclasses import dataclass, field

import numpy as np

from . import phy
from .alloc import SubcarrierAssignment, allocate_subcarriers_framed
from .phy import ChannelCode, OfdmConfig
from .quant import decode_bits, encode_bits, index_to_level, quantize_index
from .seeds import derive_seed

CHANNEL_MODELS = ("sui5", "multipath", "bsc", "ideal")
ESTIMATORS = ("ls_interp", "mmse", "perfect")


@dataclass(frozen=True)
class LinkConfig:
    ofdm: OfdmConfig = field(default_factory=OfdmConfig)
    channel: str = "sui5"
    n_paths: int = 3
    snr_db: float = 10.0
    bsc_p: float = 0.0
    code: ChannelCode = field(default_factory=ChannelCode)
    estimator: str = "ls_interp"
    gamma: float = 1.0
    analog_mode: str = "single_carrier"
    analog_preamble: int = 64

    def __post_init__(self):
        if self.channel not in CHANNEL_MODELS:
            raise ValueError(f"unknown channel model {self.channel!r}")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.analog_mode not in ("single_carrier", "ofdm"):
            raise ValueError(f"unknown analog mode {self.analog_mode!r}")

    @property
    def uses_ofdm(self) -> bool:
        return self.channel in ("sui5", "multipath")


@dataclass
class LinkRealization:
    cfg: LinkConfig
    channel: phy.ChannelRealization
    dither: np.ndarray          # unit uniforms on [-0.5, 0.5], shape (C, W*H)
    noise_seed: int
    filler_seed: int

    def subcarrier_gains(self) -> np.ndarray:
        """CSI the transmitter uses for matching: |h| on the data subcarriers."""
        n_data = self.cfg.ofdm.n_data
        if self.channel is None:
            return np.ones(n_data)
        return np.abs(self.channel.freq_response[self.cfg.ofdm.data_index])

    def assignment(self, omega) -> SubcarrierAssignment:
        return allocate_subcarriers_framed(omega, self.subcarrier_gains())


@dataclass
class TransmitResult:
    features: np.ndarray
    bits_used: int
    coded_bits: int
    pad_bits: int
    n_symbols: int
    chest_mse: float = float("nan")


def realize_link(cfg: LinkConfig, n_sem: int, map_size: int, seed) -> LinkRealization:
    """Draw one episode's channel, dither and noise/filler seeds from ``seed``."""
    if cfg.channel == "sui5":
        ch = phy.make_sui5(derive_seed(seed, "channel"), cfg.ofdm)
    elif cfg.channel == "multipath":
        ch = phy.make_multipath(cfg.n_paths, derive_seed(seed, "channel"), cfg.ofdm)
    else:
        ch = None
    dither = np.random.default_rng(derive_seed(seed, "dither")).uniform(-0.5, 0.5, (n_sem, map_size))
    return LinkRealization(cfg, ch, dither, derive_seed(seed, "noise"), derive_seed(seed, "filler"))


def quantize_features(A, bits, dither_unit, gamma=1.0):
    """Dithered quantization of every map; returns cell indices ``(C, W*H)``."""
    y = np.asarray(A, dtype=float).reshape(len(bits), -1)
    bits = np.asarray(bits, dtype=np.int64)[:, None]
    step = 2.0 * gamma / 2.0 ** bits
    return quantize_index(y + dither_unit * step, bits, gamma)


def _streams(idx, bits, code):
    """Per-semantic coded bitstreams and their information lengths."""
    out = []
    for i, b in enumerate(bits):
        raw = encode_bits(idx[i], int(b)).ravel()
        out.append((phy.channel_encode(raw, code), raw.size))
    return out


def _decode_stream(coded_rx, info_len, b, code, map_size, gamma):
    raw = phy.channel_decode(coded_rx, code, info_len)
    return index_to_level(decode_bits(raw.reshape(map_size, int(b))), int(b), gamma)


def transmit_digital(A, bits, assignment: SubcarrierAssignment, real: LinkRealization) -> TransmitResult:
    cfg = real.cfg
    A = np.asarray(A, dtype=float)
    shape = A.shape
    C = shape[0]
    map_size = int(np.prod(shape[1:]))
    bits = np.asarray(bits, dtype=np.int64)
    if bits.size != C or np.any(bits < 1):
        raise ValueError("need one positive bit count per semantic")
    idx = quantize_features(A, bits, real.dither, cfg.gamma)
    rec = np.empty((C, map_size))

    if cfg.channel == "ideal":
        rec[:] = index_to_level(idx, bits[:, None], cfg.gamma)
        coded = sum(cfg.code.coded_length(map_size * b) for b in bits)
        return TransmitResult(rec.reshape(shape), int(bits.sum() * map_size), coded, 0, 0, 0.0)

    streams = _streams(idx, bits, cfg.code)
    coded_total = sum(s.size for s, _ in streams)

    if cfg.channel == "bsc":
        for i, (s, n) in enumerate(streams):
            rx = phy.bsc(s, cfg.bsc_p, derive_seed(real.noise_seed, i))
            rec[i] = _decode_stream(rx, n, bits[i], cfg.code, map_size, cfg.gamma)
        return TransmitResult(rec.reshape(shape), int(bits.sum() * map_size), coded_total, 0, 0)

    ofdm = cfg.ofdm
    h_true = real.channel.freq_response
    pad_total = 0
    n_sym_total = 0
    mse = []
    for f in np.unique(assignment.frame_id):
        members = np.nonzero(assignment.frame_id == f)[0]
        padded = {}
        for i in members:
            p, pad = phy.pad_to_symbols(streams[i][0])
            padded[i] = phy.qam64_modulate(p)
            pad_total += pad
        n_sym = max(len(s) for s in padded.values())
        n_sym_total += n_sym
        frng = np.random.default_rng(derive_seed(real.filler_seed, int(f)))
        grid = phy.qam64_modulate(frng.integers(0, 2, 6 * n_sym * ofdm.n_data)).reshape(n_sym, ofdm.n_data)
        for i, s in padded.items():
            grid[: len(s), assignment.rho[i]] = s
        tx = phy.ofdm_modulate(grid, ofdm).ravel()
        noise = phy.NoiseConfig(cfg.snr_db, derive_seed(real.noise_seed, int(f)))
        rx = phy.apply_channel(tx, real.channel, noise).reshape(n_sym, ofdm.symbol_len)
        data, pilots = phy.ofdm_demodulate(rx, ofdm)
        if cfg.estimator == "perfect":
            h_hat = h_true
        else:
            nv = phy.noise_variance(1.0, cfg.snr_db) / n_sym
            h_hat = phy.estimate_channel(pilots.mean(axis=0), ofdm, cfg.estimator, nv,
                                         real.channel.tap_delays, real.channel.tap_powers)
        mse.append(float(np.mean(np.abs(h_hat - h_true) ** 2)))
        eq = phy.equalize(data, h_hat[ofdm.data_index], floor=phy.RELEASE_FLOOR)
        for i in members:
            s, n = streams[i]
            rx_bits = phy.qam64_demodulate(eq[: len(padded[i]), assignment.rho[i]])[: s.size]
            rec[i] = _decode_stream(rx_bits, n, bits[i], cfg.code, map_size, cfg.gamma)
    return TransmitResult(rec.reshape(shape), int(bits.sum() * map_size), coded_total,
                          pad_total, n_sym_total, float(np.mean(mse)))


def transmit_analog(A, real: LinkRealization, assignment: SubcarrierAssignment = None) -> TransmitResult:
    """Uncoded analog transmission of feature pairs as power-normalised I/Q.

    ``single_carrier`` sends the samples serially after a known preamble and
    equalises with one complex gain estimated from the preamble, so taps
    beyond the first appear as inter-symbol interference.  ``ofdm`` places the
    samples on the matched subcarriers and equalises per subcarrier.
    """
    cfg = real.cfg
    A = np.asarray(A, dtype=float)
    shape = A.shape
    flat = A.reshape(shape[0], -1)
    if flat.shape[1] % 2:
        flat = np.concatenate([flat, np.zeros((shape[0], 1))], axis=1)
    sym = flat[:, 0::2] + 1j * flat[:, 1::2]            # (C, S)
    scale = np.sqrt(np.mean(np.abs(sym) ** 2)) or 1.0
    sym = sym / scale

    if cfg.channel == "ideal":
        rx = sym
        chest = 0.0
    elif cfg.channel == "bsc":
        raise ValueError("the analog baseline has no binary-channel counterpart")
    elif cfg.analog_mode == "single_carrier":
        prng = np.random.default_rng(derive_seed(real.filler_seed, "preamble"))
        pre = np.exp(0.5j * np.pi * prng.integers(0, 4, cfg.analog_preamble))
        tx = np.concatenate([pre, sym.ravel()])
        y = phy.apply_channel(tx, real.channel, phy.NoiseConfig(cfg.snr_db, real.noise_seed))
        h0 = np.vdot(pre, y[: pre.size]) / np.vdot(pre, pre)
        chest = float(abs(h0 - real.channel.impulse_response[0]) ** 2)
        rx = phy.equalize(y[pre.size:], np.full(sym.size, h0), floor=phy.RELEASE_FLOOR).reshape(sym.shape)
    else:
        ofdm = cfg.ofdm
        if assignment is None:
            raise ValueError("ofdm analog mode needs a subcarrier assignment")
        n_sym = sym.shape[1]
        grid = np.zeros((n_sym, ofdm.n_data), dtype=complex)
        grid[:, assignment.rho] = sym.T
        txs = phy.ofdm_modulate(grid, ofdm).ravel()
        y = phy.apply_channel(txs, real.channel, phy.NoiseConfig(cfg.snr_db, real.noise_seed))
        data, pilots = phy.ofdm_demodulate(y.reshape(n_sym, ofdm.symbol_len), ofdm)
        h_true = real.channel.freq_response
        if cfg.estimator == "perfect":
            h_hat = h_true
        else:
            h_hat = phy.estimate_channel(pilots.mean(axis=0), ofdm, cfg.estimator,
                                         phy.noise_variance(1.0, cfg.snr_db) / n_sym,
                                         real.channel.tap_delays, real.channel.tap_powers)
        chest = float(np.mean(np.abs(h_hat - h_true) ** 2))
        eq = phy.equalize(data, h_hat[ofdm.data_index], floor=phy.RELEASE_FLOOR)
        rx = eq[:, assignment.rho].T

    rx = rx * scale
    out = np.empty_like(flat)
    out[:, 0::2] = rx.real
    out[:, 1::2] = rx.imag
    out = out[:, : int(np.prod(shape[1:]))]
    return TransmitResult(out.reshape(shape), 0, 0, 0, sym.shape[1], chest)
