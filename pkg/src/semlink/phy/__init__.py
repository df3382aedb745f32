"""Digital physical layer: coding, 64QAM, OFDM, channels and estimation."""

from .channel import (SUI5_DELAYS, SUI5_POWERS_DB, ChannelRealization, NoiseConfig,
                      apply_channel, bsc, make_multipath, make_sui5, multipath_delays,
                      noise_variance)
from .coding import ChannelCode, channel_decode, channel_encode
from .estimation import RELEASE_FLOOR, equalize, estimate_channel
from .ofdm import OfdmConfig, even_pilot_positions, ofdm_demodulate, ofdm_modulate
from .qam import constellation, pad_to_symbols, qam64_demodulate, qam64_modulate

__all__ = [
    "SUI5_DELAYS", "SUI5_POWERS_DB", "ChannelRealization", "NoiseConfig",
    "apply_channel", "bsc", "make_multipath", "make_sui5", "multipath_delays",
    "noise_variance", "ChannelCode", "channel_decode", "channel_encode",
    "RELEASE_FLOOR", "equalize", "estimate_channel", "OfdmConfig",
    "even_pilot_positions", "ofdm_demodulate", "ofdm_modulate", "constellation",
    "pad_to_symbols", "qam64_demodulate", "qam64_modulate",
]
