"""Train the DPPO bit allocator on the desk config and compare it with EAM.

This takes a few minutes on one core (500 iterations of 16 episodes).
Pass a smaller iteration count as the first argument for a quick look:
    python3 demos/03_train_dppo.py 100
"""

import sys

import numpy as np

from semlink import dppo
from semlink.harness import compare_allocators, load_artifacts, make_config, train_policy

iterations = int(sys.argv[1]) if len(sys.argv) > 1 else 500
cfg = make_config({"C": 16, "B": 48, "dppo_iterations": iterations, "trials": 200,
                   "allocators": ["dppo", "eam", "rbam", "ram"]})
art = load_artifacts(cfg)


def show(row):
    if row["iteration"] % 50 == 0:
        print(f"iter {row['iteration']:4d}  mean reward {row['mean_reward']:.4f}  "
              f"entropy {row['entropy']:.3f}")


res = train_policy(cfg, art, "dppo", callback=show)
last = [(n, s) for it, n, s in res.episodes if it >= iterations - 50]
eam = dppo.eam_reference_reward(art.codec, art.g, art.train, cfg.link(), cfg.hyper(), cfg.B, last)
print(f"final-50 reward {res.rewards()[-50:].mean():.4f}  EAM on the same episodes {eam:.4f}")

text, _ = compare_allocators(cfg, art)
print(text)
