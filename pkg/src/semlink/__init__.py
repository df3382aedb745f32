"""Importance-aware digital semantic communication over a simulated OFDM link.

Modules
-------
quant       dithered uniform scalar quantizer and bit packing
phy         Hamming(7,4), 64QAM, OFDM, multipath channels, estimation, BSC
semcodec    toy feature encoder and classifier head on synthetic data
importance  task relevance, inter-feature relevance, combined weights
alloc       subcarrier matching, baseline bit allocators, distortion
link        one quantize-modulate-transmit-recover pass for given bits
dppo        PPO bit allocator with a masked, budget-aware action space
kb          knowledge-base file holding codec, task relevance and policies
harness     configs, episodes, sweeps, comparisons and the ``semlink`` CLI
"""

__version__ = "0.1.0"
