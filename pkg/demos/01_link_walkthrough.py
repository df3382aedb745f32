"""Walk one feature tensor through the digital link.

Encode an input, quantize every feature map with the same number of bits,
send the bits over SUI-5 OFDM at a few SNRs and look at what comes back.
Run:  python3 demos/01_link_walkthrough.py
"""

import numpy as np

from semlink import phy
from semlink.alloc import allocate_bits_eam, weighted_distortion
from semlink.importance import compute_str, importance
from semlink.link import LinkConfig, realize_link, transmit_digital
from semlink.quant import QuantizerSpec, encode_bits, uniform_quantize
from semlink.semcodec import encode, generate_dataset, task_logits, train_codec

# The quantizer on its own: 2 bits over [-1, 1] gives four levels.
spec = QuantizerSpec(2)
print("levels:", spec.level_values())
print("0.3 ->", uniform_quantize(0.3, spec), "bits", encode_bits(2, spec))

# One 64QAM symbol and its hard decision.
sym = phy.qam64_modulate([0, 0, 0, 0, 0, 0])
print("corner symbol * sqrt(42):", np.round(sym * np.sqrt(42), 6))

# A small codec, trained on synthetic Gaussian blobs.
ds = generate_dataset(2000, 32, 10, seed=1)
train, test = ds.split(1500)
codec = train_codec(train, seed=2, shape=(16, 2, 2))
print(f"codec train accuracy {codec.train_accuracy:.3f}")
g = compute_str(codec, encode(train.inputs[:200], codec))

x, label = test.inputs[0], test.labels[0]
A = encode(x, codec)
w = importance(A, g).omega
b = allocate_bits_eam(48, 16, w).b
print("bits per map:", b)

for snr in (0, 10, 20, 30):
    cfg = LinkConfig(channel="sui5", snr_db=snr, estimator="mmse")
    real = realize_link(cfg, 16, 4, seed=7)
    res = transmit_digital(A, b, real.assignment(w), real)
    pred = int(np.argmax(task_logits(res.features, codec)))
    print(f"SNR {snr:2d} dB: distortion {weighted_distortion(A, res.features, w):.4f}  "
          f"channel-estimate MSE {res.chest_mse:.2e}  predicted {pred} (true {label})")
