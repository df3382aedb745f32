"""Feature importance and the three baseline bit allocators.

Shows the task relevance g, the inter-feature relevance v and their
normalised product omega for one input, then compares even (EAM),
importance-proportional (RBAM) and random (RAM) allocation on paired
episodes.
Run:  python3 demos/02_importance_and_baselines.py
"""

import numpy as np

from semlink.harness import load_artifacts, make_config, compare_allocators, export_importance_map

cfg = make_config({"C": 16, "B": 48, "trials": 100, "allocators": ["eam", "rbam", "ram"]})
art = load_artifacts(cfg)

print("importance map for test input 0 (rbam bits):")
print(export_importance_map(cfg, art, sample=0, allocator="rbam"))

text, results = compare_allocators(cfg, art)
print(text)
for name, eps in results.items():
    d = np.array([r.weighted_distortion for r in eps])
    print(f"{name:5s} distortion {d.mean():.3f} +- {d.std() / np.sqrt(d.size):.3f}")
