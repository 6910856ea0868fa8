"""
Rolling out past the trained horizon
====================================

The toy model was "trained" on 21 latent frames. We generate 12 blocks
(36 frames) and watch the temporal coordinates: once the newest frame
passes 21, the window slides and the oldest frames collapse onto 1.
"""

import numpy as np

from horizon import Engine, ModelConfig, ToyDiT

model = ToyDiT(ModelConfig())
engine = Engine(model, capacity=6, capture=False)
trace = engine.rollout(12)

for rec in trace.blocks:
    past = " ".join(f"{k}:{v}" for k, v in rec.past_coordinates.items())
    print(f"block {rec.block:2d} frames {rec.logical_indices} -> {rec.coordinates}   past {past}")

# the largest coordinate ever handed to the model
print("max coordinate:", max(trace.all_coordinates()))

# %%
# Unbounded mode keeps every frame; old frames are clamped to coordinate 1
# ("semanticized") instead of being evicted.
engine = Engine(model, mode="unbounded", capture=False)
engine.rollout(8)
engine.cache.begin_block(engine.block_indices())
print("semanticized frames at block 9:", engine.cache.semanticize())
print("resident:", len(engine.cache.entries), "frames")

# latents are ordinary numpy arrays
x = trace.latents[-1]
print("last block latent:", x.shape, x.dtype, f"std={np.std(x):.3f}")
