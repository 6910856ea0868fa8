"""
Switching prompts with a KV flush
=================================

A flush drops everything but the attention sink (frame 1) and the newest
frame, then swaps the prompt. The next block only sees those two frames.
"""

from horizon import Engine, ModelConfig, RolloutCommand, ToyDiT

model = ToyDiT(ModelConfig())
engine = Engine(model, prompt="a dog running on the beach", capture=False)
schedule = [RolloutCommand.flush("the dog jumps into the water", at_block=5)]
trace = engine.rollout(7, schedule)

for rec in trace.blocks:
    print(f"block {rec.block}: prompt={rec.prompt!r:34} attends {rec.attended}")

print("evicted by the flush:", trace.flushes)

# the flush itself touches no tokens; its cost does not grow with the cache
print("token ops:", engine.cache.counters["token_ops"], " flushes:", engine.cache.counters["flushes"])
