"""Rotary position embeddings over (frame, height, width).

Rotation pairs are interleaved: pair ``j`` is ``(v[2j], v[2j+1])``. The head
dimension is split into three contiguous groups of pairs, temporal first, then
height, then width. Angles are formed in float64 so that fractional and large
indices compose exactly before the result is rounded back to the input dtype.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, ShapeError

DEFAULT_BASE = 10000.0
# Size of the positional table in the base model; every axis must resolve
# indices up to this without the slowest frequency wrapping.
MAX_INDEX = 1024


class Coord3(NamedTuple):
    f: object
    h: object = 0
    w: object = 0


@dataclass(frozen=True)
class FrequencyTable:
    pairs_f: int
    pairs_h: int
    pairs_w: int
    freqs_f: np.ndarray
    freqs_h: np.ndarray
    freqs_w: np.ndarray
    base: float = DEFAULT_BASE

    @property
    def head_dim(self) -> int:
        return 2 * (self.pairs_f + self.pairs_h + self.pairs_w)

    @property
    def split(self):
        return (self.pairs_f, self.pairs_h, self.pairs_w)

    def slices(self):
        """Channel slices of the temporal, height and width groups."""
        a = 2 * self.pairs_f
        b = a + 2 * self.pairs_h
        return slice(0, a), slice(a, b), slice(b, self.head_dim)


def default_split(head_dim: int):
    """Temporal axis takes the remainder: ``(P - 2*(P//3), P//3, P//3)``."""
    if head_dim % 2:
        raise ConfigError(f"head_dim must be even, got {head_dim}")
    p = head_dim // 2
    return (p - 2 * (p // 3), p // 3, p // 3)


def axis_frequencies(pairs: int, base: float) -> np.ndarray:
    j = np.arange(pairs, dtype=np.float64)
    return base ** (-j / pairs) if pairs else np.zeros(0)


def build_frequencies(head_dim: int, split=None, base: float = DEFAULT_BASE) -> FrequencyTable:
    """Frequency table for pair ``j`` of an axis with ``P`` pairs: ``base**(-j/P)``.

    Args:
        head_dim: per-head channel count, even.
        split: ``(pairs_f, pairs_h, pairs_w)``; defaults to :func:`default_split`.
        base: frequency base, > 1.
    """
    if split is None:
        split = default_split(head_dim)
    split = tuple(int(s) for s in split)
    if len(split) != 3 or any(s < 0 for s in split):
        raise ConfigError(f"rope split must be three non-negative counts, got {split}")
    if head_dim % 2 or sum(split) != head_dim // 2:
        raise ConfigError(f"rope split {split} does not sum to head_dim/2 = {head_dim / 2:g}")
    if base <= 1:
        raise ConfigError(f"rope base must exceed 1, got {base}")
    pf, ph, pw = split
    return FrequencyTable(pf, ph, pw, axis_frequencies(pf, base), axis_frequencies(ph, base),
                          axis_frequencies(pw, base), float(base))


def rotate_1d(v, index, freqs):
    """Rotate each pair ``(v[2j], v[2j+1])`` by ``index * freqs[j]``.

    ``v`` may carry leading batch axes; ``index`` broadcasts against them.
    """
    v = np.asarray(v)
    freqs = np.asarray(freqs, dtype=np.float64)
    if v.shape[-1] != 2 * freqs.shape[0]:
        raise ShapeError(f"rotate_1d: {v.shape[-1]} channels for {freqs.shape[0]} frequencies")
    if freqs.shape[0] == 0:
        return v.copy()
    ang = np.asarray(index, dtype=np.float64)[..., None] * freqs
    c, s = np.cos(ang), np.sin(ang)
    x = v[..., 0::2].astype(np.float64)
    y = v[..., 1::2].astype(np.float64)
    out = np.empty(np.broadcast_shapes(v.shape, ang.shape[:-1] + (v.shape[-1],)), dtype=v.dtype)
    out[..., 0::2] = x * c - y * s
    out[..., 1::2] = x * s + y * c
    return out


def shift_rotation(v, delta, freqs):
    """Advance an already rotated vector by ``delta`` index steps.

    Negative ``delta`` rotates the phase backward, which is how past frames
    are re-anchored when the reference window moves.
    """
    return rotate_1d(v, delta, freqs)


def apply_rope3d(x, c: Coord3, table: FrequencyTable, temporal_only: bool = False):
    """Rotate the temporal, height and width channel groups of ``x`` by ``c``.

    ``c.f``, ``c.h``, ``c.w`` may be scalars or arrays broadcasting against
    the leading axes of ``x``. With ``temporal_only`` the spatial groups are
    passed through unchanged.
    """
    x = np.asarray(x)
    if x.shape[-1] != table.head_dim:
        raise ShapeError(f"apply_rope3d: token has {x.shape[-1]} channels, table expects {table.head_dim}")
    sf, sh, sw = table.slices()
    parts = [rotate_1d(x[..., sf], c.f, table.freqs_f)]
    if temporal_only:
        rest = np.broadcast_to(x[..., sh.start:], parts[0].shape[:-1] + (x.shape[-1] - sh.start,))
        parts.append(rest)
    else:
        parts.append(rotate_1d(x[..., sh], c.h, table.freqs_h))
        parts.append(rotate_1d(x[..., sw], c.w, table.freqs_w))
    lead = np.broadcast_shapes(*(p.shape[:-1] for p in parts))
    return np.concatenate([np.broadcast_to(p, lead + p.shape[-1:]) for p in parts], axis=-1)


def temporal_logit_profile(v, freqs, distances):
    """Closed form of ``<rot(v, a), rot(v, b)>`` as a function of ``a - b``.

    For a vector rotated by the same frequencies at two indices the inner
    product is ``sum_j |pair_j|^2 cos(d * freqs[j])``.
    """
    v = np.asarray(v, dtype=np.float64)
    energy = v[0::2] ** 2 + v[1::2] ** 2
    d = np.asarray(distances, dtype=np.float64)[..., None]
    return (energy * np.cos(d * np.asarray(freqs))).sum(axis=-1)
