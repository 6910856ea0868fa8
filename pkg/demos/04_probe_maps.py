"""
Reading the frame attention map
===============================

The probe head replaces the middle layer's query and key with one constant
vector, so its attention depends only on temporal coordinates. That makes
the map's structure predictable: a diagonal band, a sink column that fades
with distance, and blocks separating after a cut.
"""

import numpy as np

from horizon import RunConfig, RolloutCommand
from horizon import analysis as A

np.set_printoptions(precision=2, suppress=True, linewidth=160)

fmap = A.rope_probe_map(RunConfig(n_blocks=4))
print(fmap.M)
print("band mass (width 3):", round(A.band_mass(fmap, 3), 3))
print("sink column mass:   ", round(A.sink_column_mass(fmap), 3))

# %%
# After a flush the first new block leans on the two anchors.
cfg = RunConfig(n_blocks=7, schedule=[RolloutCommand.flush("new scene", 5)])
flushed = A.rope_probe_map(cfg)
anchor, intermediate = A.flush_redirection(flushed, 13)
print(f"anchor mass {anchor:.3f} vs largest pre-flush intermediate {intermediate:.3f}")
print("mass on flushed frames afterwards:", A.flush_suppression(flushed, 13))

# %%
# A cut pushes the jumped frames away from earlier content.
control = A.rope_probe_map(RunConfig(n_blocks=5))
control.cuts[4] = (5, 6)
cut = A.rope_probe_map(RunConfig(n_blocks=5, schedule=[RolloutCommand.cut(15, 2)]))
print("disjointness, no cut:", round(A.cut_disjointness(control, 4), 4))
print("disjointness, cut 15:", round(A.cut_disjointness(cut, 4), 4))

# the toy model's own map (not the probe) for comparison
from horizon import build_engine
trace = build_engine(RunConfig(n_blocks=4)).rollout(4)
print(A.trace_attention_map(trace).M)
