"""A tiny block-causal diffusion transformer with frozen random weights.

Tokens of a block are laid out frame-major: token ``n`` belongs to frame
``n // (H*W)`` of the block and sits at grid cell ``divmod(n % (H*W), W)``.
Queries see every cached token plus every token of their own block.
"""

import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cache import FRAMES_PER_BLOCK, KvCache
from .errors import ConfigError, HorizonRangeError, ProtocolError, ShapeError
from .numerics import DTYPE, derive_seed, gelu, matmul, rms_norm, seeded_gaussian, softmax_rows
from .rope import Coord3, apply_rope3d, build_frequencies


class DomainError(HorizonRangeError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 2
    heads: int = 2
    head_dim: int = 16
    grid: tuple = (4, 4)
    latent_channels: int = 32
    f_limit: int = 21
    seed: int = 0
    rope_base: float = 10000.0
    rope_split: Optional[tuple] = None
    prompt_dim: int = 32
    time_features: int = 32
    ffn_mult: int = 4
    weight_scale: float = 0.02

    def __post_init__(self):
        if self.head_dim % 2:
            raise ConfigError(f"head_dim must be even, got {self.head_dim}")
        if self.layers < 1 or self.heads < 1:
            raise ConfigError("layers and heads must be positive")
        if len(self.grid) != 2 or min(self.grid) < 1:
            raise ConfigError(f"grid must be two positive extents, got {self.grid}")
        # raises on a bad split
        build_frequencies(self.head_dim, self.rope_split, self.rope_base)

    @property
    def d_model(self) -> int:
        return self.heads * self.head_dim

    @property
    def tokens_per_frame(self) -> int:
        return self.grid[0] * self.grid[1]

    @property
    def tokens_per_block(self) -> int:
        return FRAMES_PER_BLOCK * self.tokens_per_frame


@dataclass(frozen=True)
class PromptEmbedding:
    vector: np.ndarray
    label: str


@dataclass
class AttentionRecord:
    """Attention weights of one layer for one block's queries.

    ``weights`` is ``(heads, n_query, n_key)``; ``query_frames`` and
    ``key_frames`` give the logical frame of every query and key token.
    """

    layer: int
    block: int
    weights: np.ndarray
    query_frames: np.ndarray
    key_frames: np.ndarray
    query_coords: np.ndarray
    key_coords: np.ndarray


def prompt_embed(prompt: str, config: ModelConfig) -> PromptEmbedding:
    digest = hashlib.sha256(prompt.encode("utf-8")).digest()
    seed = derive_seed(config.seed, 0x50524F4D5054, int.from_bytes(digest[:8], "little"))
    v = seeded_gaussian(config.prompt_dim, seed).astype(np.float64)
    v /= np.linalg.norm(v)
    return PromptEmbedding(v.astype(DTYPE), prompt)


def cfg_velocity(v_cond, v_uncond, scale: float):
    v_cond = np.asarray(v_cond, dtype=DTYPE)
    v_uncond = np.asarray(v_uncond, dtype=DTYPE)
    if v_cond.shape != v_uncond.shape:
        raise ShapeError(f"cfg_velocity: {v_cond.shape} vs {v_uncond.shape}")
    return (v_uncond + DTYPE(scale) * (v_cond - v_uncond)).astype(DTYPE)


def timestep_features(t: float, n: int) -> np.ndarray:
    half = n // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
    ang = 1000.0 * t * freqs
    return np.concatenate([np.cos(ang), np.sin(ang)]).astype(DTYPE)


@dataclass
class Probe:
    """Constant query/key vector substituted at one layer.

    With temporal RoPE only, the logit between frames at coordinates ``a``
    and ``b`` is ``<rot(v, a), rot(v, b)>``, a closed-form function of
    ``a - b`` (see :func:`horizon.rope.temporal_logit_profile`).
    """

    vector: np.ndarray
    layer: int


class ToyDiT:
    def __init__(self, config: ModelConfig = ModelConfig(), probe: Optional[Probe] = None):
        self.config = config
        self.table = build_frequencies(config.head_dim, config.rope_split, config.rope_base)
        self.probe = probe
        c = config
        d, hid = c.d_model, c.ffn_mult * c.d_model
        counter = iter(range(1, 10_000))

        def w(*shape):
            return (seeded_gaussian(shape, derive_seed(c.seed, next(counter))) * DTYPE(c.weight_scale)).astype(DTYPE)

        self.w_in = w(c.latent_channels, d)
        self.w_time = w(c.time_features, d)
        self.w_prompt = w(c.prompt_dim, d)
        self.blocks = []
        for _ in range(c.layers):
            self.blocks.append({
                "wq": w(d, d), "wk": w(d, d), "wv": w(d, d), "wo": w(d, d),
                "w1": w(d, hid), "w2": w(hid, d),
                "g_attn": np.ones(d, DTYPE), "g_ffn": np.ones(d, DTYPE),
            })
        self.g_out = np.ones(d, DTYPE)
        self.w_out = w(d, c.latent_channels)

        n = c.tokens_per_frame
        cell = np.arange(c.tokens_per_block) % n
        self.tok_h, self.tok_w = np.divmod(cell, c.grid[1])
        self.tok_frame = np.arange(c.tokens_per_block) // n

    # -- attention ---------------------------------------------------------

    def _heads(self, x):
        return x.reshape(x.shape[0], self.config.heads, self.config.head_dim)

    def attention_block(self, h, cache: KvCache, coords, layer: int, block_indices,
                        capture: bool = False, block: int = 0):
        """Self-attention of one block over the cache plus itself.

        Args:
            h: normalized hidden states, ``(3*H*W, d_model)``.
            cache: K/V store; cached keys are rotated here at ``coords``.
            coords: mapping logical frame index -> temporal coordinate.
            layer: layer index into the cache entries.
            block_indices: logical indices of the current block's frames.

        Returns:
            ``(out, record, (k, v))`` where ``k``/``v`` are the block's own
            keys (no temporal rotation) and values for committing.
        """
        c = self.config
        blk = self.blocks[layer]
        q = self._heads(matmul(h, blk["wq"]))
        k = self._heads(matmul(h, blk["wk"]))
        v = self._heads(matmul(h, blk["wv"]))

        missing = [e.logical_index for e in cache.entries if e.logical_index not in coords]
        missing += [li for li in block_indices if li not in coords]
        if missing:
            raise ProtocolError(f"no temporal coordinate for frames {missing}")

        q_frames = np.asarray(block_indices)[self.tok_frame]
        q_f = np.array([coords[li] for li in q_frames], dtype=np.float64)

        key_parts, val_parts, key_frames, key_f, key_h, key_w = [], [], [], [], [], []
        n = c.tokens_per_frame
        cell = np.arange(n)
        for e in cache.entries:
            key_parts.append(e.keys[layer])
            val_parts.append(e.values[layer])
            key_frames.append(np.full(n, e.logical_index))
            key_f.append(np.full(n, coords[e.logical_index], dtype=np.float64))
            key_h.append(cell // c.grid[1])
            key_w.append(cell % c.grid[1])
        key_parts.append(k)
        val_parts.append(v)
        key_frames.append(q_frames)
        key_f.append(q_f)
        key_h.append(self.tok_h)
        key_w.append(self.tok_w)
        K = np.concatenate(key_parts)
        V = np.concatenate(val_parts)
        kf = np.concatenate(key_frames)
        kc = np.concatenate(key_f)
        kh = np.concatenate(key_h)
        kw = np.concatenate(key_w)

        if self.probe is not None and self.probe.layer == layer:
            pv = np.asarray(self.probe.vector, dtype=DTYPE)
            qr = apply_rope3d(np.broadcast_to(pv, q.shape), Coord3(q_f[:, None]), self.table, temporal_only=True)
            kr = apply_rope3d(np.broadcast_to(pv, K.shape), Coord3(kc[:, None]), self.table, temporal_only=True)
            scale = DTYPE(1.0)
        else:
            qr = apply_rope3d(q, Coord3(q_f[:, None], self.tok_h[:, None], self.tok_w[:, None]), self.table)
            kr = apply_rope3d(K, Coord3(kc[:, None], kh[:, None], kw[:, None]), self.table)
            scale = DTYPE(1.0 / np.sqrt(c.head_dim))

        logits = np.einsum("qhd,khd->hqk", qr, kr).astype(DTYPE) * scale
        weights = softmax_rows(logits)
        out = np.einsum("hqk,khd->qhd", weights, V).reshape(h.shape[0], c.d_model)
        out = matmul(out, blk["wo"])
        record = None
        if capture:
            record = AttentionRecord(layer, block, weights, q_frames, kf, q_f, kc)
        return out, record, (k, v)

    # -- full pass ---------------------------------------------------------

    def forward(self, x, t: float, prompt: Optional[PromptEmbedding], cache: KvCache, coords,
                block_indices, capture_layer: Optional[int] = None, block: int = 0):
        """Run all layers; returns ``(velocity, record, per-layer (k, v))``."""
        c = self.config
        if not (0.0 <= t <= 1.0):
            raise DomainError(f"timestep {t} outside [0, 1]")
        x = np.asarray(x, dtype=DTYPE)
        if x.shape != (c.tokens_per_block, c.latent_channels):
            raise ShapeError(f"expected block of shape {(c.tokens_per_block, c.latent_channels)}, got {x.shape}")
        cond = matmul(timestep_features(t, c.time_features), self.w_time)
        if prompt is not None:
            cond = cond + matmul(prompt.vector, self.w_prompt)
        h = matmul(x, self.w_in) + cond
        record, kvs = None, []
        for li, blk in enumerate(self.blocks):
            a, rec, kv = self.attention_block(rms_norm(h, blk["g_attn"]), cache, coords, li, block_indices,
                                              capture=(li == capture_layer), block=block)
            if rec is not None:
                record = rec
            kvs.append(kv)
            h = h + a
            h = h + matmul(gelu(matmul(rms_norm(h, blk["g_ffn"]), blk["w1"])), blk["w2"])
        out = matmul(rms_norm(h, self.g_out), self.w_out)
        return out.astype(DTYPE), record, kvs

    def velocity_forward(self, x_t, t: float, prompt, cache, coords, block_indices):
        return self.forward(x_t, t, prompt, cache, coords, block_indices)[0]

    def commit_block_kv(self, clean_block, cache: KvCache, coords, block_indices, prompt=None, block=None):
        """Recompute per-layer K/V of the finished block at t=0 and append it."""
        _, _, kvs = self.forward(clean_block, 0.0, prompt, cache, coords, block_indices)
        keys = [k for k, _ in kvs]
        values = [v for _, v in kvs]
        return cache.append_block((keys, values), block_indices, block=block)
