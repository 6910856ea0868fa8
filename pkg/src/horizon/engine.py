"""Autoregressive block rollout with a shifted few-step Euler sampler."""

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .cache import FRAMES_PER_BLOCK, KvCache, absolute_coordinates
from .errors import ProtocolError
from .model import ModelConfig, PromptEmbedding, ToyDiT, cfg_velocity, prompt_embed
from .numerics import DTYPE, derive_seed, seeded_gaussian

COMMAND_KINDS = ("continue", "flush", "cut", "prompt")


def latent_frame_count(n_frames: int, temporal_stride: int = 4) -> int:
    """Latent frames produced from ``n_frames`` pixel frames: ``1 + ceil((F-1)/4)``."""
    return 1 + math.ceil((n_frames - 1) / temporal_stride)


def shifted_timesteps(n_steps: int, shift: float):
    """Sampling times for a uniform grid warped by ``t = s*u / (1 + (s-1)*u)``.

    Returns ``n_steps`` descending values starting at 1.0; integration ends
    at t=0 after the last one.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if shift <= 0:
        raise ValueError(f"shift must be positive, got {shift}")
    u = 1.0 - np.arange(n_steps) / n_steps
    return [float(x) for x in shift * u / (1.0 + (shift - 1.0) * u)]


@dataclass(frozen=True)
class RolloutCommand:
    kind: str
    at_block: int
    prompt: Optional[str] = None
    delta: Optional[int] = None
    forced: bool = False

    def __post_init__(self):
        if self.kind not in COMMAND_KINDS:
            raise ValueError(f"unknown command {self.kind!r}")
        if self.at_block < 1:
            raise ValueError(f"at_block must be >= 1, got {self.at_block}")
        if self.kind == "cut" and (self.delta is None or self.delta < 1):
            raise ValueError(f"cut needs delta >= 1, got {self.delta}")
        if self.kind in ("flush", "prompt") and self.prompt is None:
            raise ValueError(f"{self.kind} needs a prompt")

    @classmethod
    def cont(cls, at_block):
        return cls("continue", at_block)

    @classmethod
    def flush(cls, prompt, at_block):
        return cls("flush", at_block, prompt=prompt)

    @classmethod
    def cut(cls, delta, at_block, forced=False):
        return cls("cut", at_block, delta=int(delta), forced=forced)

    @classmethod
    def set_prompt(cls, prompt, at_block):
        return cls("prompt", at_block, prompt=prompt)

    def describe(self):
        d = {"kind": self.kind, "at_block": self.at_block}
        if self.prompt is not None:
            d["prompt"] = self.prompt
        if self.delta is not None:
            d["delta"] = self.delta
        if self.forced:
            d["forced"] = True
        return d


@dataclass
class BlockRecord:
    block: int
    logical_indices: list
    coordinates: list
    past_coordinates: dict
    commands: list
    attended: list
    resident: list
    evicted: list
    timesteps: list
    prompt: str
    latent_sha256: str

    def to_json(self):
        d = dict(self.__dict__)
        d["past_coordinates"] = {str(k): v for k, v in self.past_coordinates.items()}
        return json.dumps(d, separators=(",", ":"))


@dataclass
class RolloutTrace:
    blocks: list = field(default_factory=list)
    attention: list = field(default_factory=list)
    cache_rows: list = field(default_factory=list)
    latents: list = field(default_factory=list)
    flushes: dict = field(default_factory=dict)
    cuts: dict = field(default_factory=dict)
    tokens_per_frame: int = 0

    def all_coordinates(self):
        out = []
        for b in self.blocks:
            out.extend(b.coordinates)
            out.extend(b.past_coordinates.values())
        return out

    def peak_residency(self):
        return max((len(b.resident) for b in self.blocks), default=0)

    def trace_jsonl(self):
        return "".join(b.to_json() + "\n" for b in self.blocks)

    def cache_jsonl(self):
        return "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in self.cache_rows)


class Engine:
    """Owns one rollout: cache, prompt state and block counter.

    ``positional="absolute"`` swaps the relativistic coordinates for plain
    logical indices; it exists as the reference for within-horizon checks.
    """

    def __init__(self, model: ToyDiT, *, f0=21, capacity=6, mode="fixed", cfg_scale=3.0, shift=5.0,
                 n_steps=4, seed=0, capture_layer=None, capture=True, prompt="",
                 positional="relativistic", force_cut=False):
        self.model = model
        cfg = model.config
        self.cache = KvCache(capacity=capacity, f0=f0, f_limit=cfg.f_limit, mode=mode)
        self.cfg_scale = cfg_scale
        self.timesteps = shifted_timesteps(n_steps, shift)
        self.seed = seed
        self.capture_layer = cfg.layers // 2 if capture_layer is None else capture_layer
        self.capture = capture
        self.positional = positional
        self.force_cut = force_cut
        self.block = 1
        self.prompt = prompt_embed(prompt, cfg)
        self.trace = RolloutTrace(tokens_per_frame=cfg.tokens_per_frame)
        self._pending = []

    def block_indices(self, b=None):
        b = self.block if b is None else b
        return tuple(range(FRAMES_PER_BLOCK * (b - 1) + 1, FRAMES_PER_BLOCK * b + 1))

    def block_noise(self, b):
        cfg = self.model.config
        return seeded_gaussian((cfg.tokens_per_block, cfg.latent_channels), derive_seed(self.seed, b))

    def coordinates(self):
        i = self.block_indices()[-1]
        if self.positional == "absolute":
            return absolute_coordinates(self.cache, i)
        return self.cache.assign_coordinates(i)

    # -- commands ----------------------------------------------------------

    def handle_command(self, cmd: RolloutCommand):
        """Apply ``cmd`` to the block about to be denoised."""
        if cmd.at_block != self.block:
            raise ProtocolError(f"command for block {cmd.at_block} arrived at block {self.block}")
        if self.cache.active is None:
            self.cache.begin_block(self.block_indices())
        desc = cmd.describe()
        if cmd.kind == "flush":
            evicted = self.cache.kv_flush()
            self.prompt = prompt_embed(cmd.prompt, self.model.config)
            self.trace.flushes[self.block_indices()[0]] = tuple(evicted)
            desc["evicted"] = evicted
        elif cmd.kind == "cut":
            self.cache.apply_cut(cmd.delta, force=cmd.forced or self.force_cut)
            self.trace.cuts[self.block_indices()[0]] = self.block_indices()[1:]
            desc["forced"] = self.cache.active_forced
        elif cmd.kind == "prompt":
            self.prompt = prompt_embed(cmd.prompt, self.model.config)
        self._pending.append(desc)
        return self

    # -- sampling ----------------------------------------------------------

    def model_velocity(self, coords, indices, capture):
        def velocity(x, t, step):
            grab = capture and step == len(self.timesteps) - 1
            layer = self.capture_layer if grab else None
            v_c, rec, _ = self.model.forward(x, t, self.prompt, self.cache, coords, indices,
                                             capture_layer=layer, block=self.block)
            v_u, _, _ = self.model.forward(x, t, None, self.cache, coords, indices, block=self.block)
            if rec is not None:
                self.trace.attention.append(rec)
            return cfg_velocity(v_c, v_u, self.cfg_scale)
        return velocity

    def denoise_block(self, velocity: Callable, noise=None):
        """Euler-integrate ``velocity(x, t, step)`` from t=1 to t=0."""
        x = self.block_noise(self.block) if noise is None else np.asarray(noise, dtype=DTYPE)
        ts = list(self.timesteps) + [0.0]
        for k in range(len(self.timesteps)):
            v = velocity(x, ts[k], k)
            x = (x + DTYPE(ts[k + 1] - ts[k]) * v).astype(DTYPE)
        return x

    def step(self, commands=()):
        """Generate one block, applying ``commands`` first."""
        indices = self.block_indices()
        self.cache.begin_block(indices)
        self._pending = []
        for cmd in commands:
            self.handle_command(cmd)
        coords = self.coordinates()
        attended = self.cache.resident_frames()
        x0 = self.denoise_block(self.model_velocity(coords, indices, self.capture))
        evicted = self.model.commit_block_kv(x0, self.cache, coords, indices, self.prompt, block=self.block)

        past = {li: int(coords[li]) for li in attended}
        after = self.cache.assign_coordinates(indices[-1])
        for row in self.cache.snapshot(after):
            self.trace.cache_rows.append({"block": self.block, **row})
        rec = BlockRecord(
            block=self.block,
            logical_indices=list(indices),
            coordinates=[int(coords[li]) for li in indices],
            past_coordinates=past,
            commands=self._pending,
            attended=attended,
            resident=self.cache.resident_frames(),
            evicted=evicted,
            timesteps=list(self.timesteps),
            prompt=self.prompt.label,
            latent_sha256=hashlib.sha256(x0.tobytes()).hexdigest()[:16],
        )
        self.trace.blocks.append(rec)
        self.trace.latents.append(x0)
        self.block += 1
        return rec

    def rollout(self, n_blocks: int, schedule=()):
        schedule = list(schedule)
        if any(a.at_block > b.at_block for a, b in zip(schedule, schedule[1:])):
            raise ProtocolError("schedule must be sorted by at_block")
        if schedule and schedule[0].at_block < self.block:
            raise ProtocolError(f"schedule starts at block {schedule[0].at_block}, engine is at {self.block}")
        end = self.block + n_blocks
        while self.block < end:
            cmds = [c for c in schedule if c.at_block == self.block]
            self.step(cmds)
        return self.trace


def build_engine(config, probe=None):
    """Engine for a :class:`horizon.config.RunConfig`."""
    model = ToyDiT(config.model_config(), probe=probe)
    return Engine(model, f0=config.f0, capacity=config.capacity, mode=config.mode, cfg_scale=config.cfg_scale,
                  shift=config.shift, n_steps=config.n_steps, seed=config.seed,
                  capture_layer=config.capture_layer, capture=True, prompt=config.prompt,
                  force_cut=config.force_cut)
