"""
Scene cuts by jumping the temporal phase
========================================

A cut of size delta pins the current block to (f-2, f+delta-1, f+delta):
the first frame stays put, the other two leap ahead. The following block
starts fresh at the old position, with the leapt frames as distant context.
"""

from horizon import Engine, ModelConfig, RolloutCommand, ToyDiT
from horizon.errors import HorizonRangeError

model = ToyDiT(ModelConfig())
trace = Engine(model, capture=False).rollout(3, [RolloutCommand.cut(15, at_block=2)])
for rec in trace.blocks:
    print(f"block {rec.block}: {rec.coordinates}  past {rec.past_coordinates}")

# %%
# A jump longer than the trained horizon is refused unless forced.
try:
    Engine(model, capture=False).rollout(2, [RolloutCommand.cut(90, at_block=2)])
except HorizonRangeError as exc:
    print("refused:", exc)

rec = Engine(model, capture=False).rollout(2, [RolloutCommand.cut(90, at_block=2, forced=True)]).blocks[-1]
print("forced:", rec.coordinates)
