"""KV cache with block-relativistic temporal coordinates.

Keys are stored un-rotated. Temporal coordinates are recomputed for every
block from each entry's *virtual index*, which is its logical frame index
minus the number of frames skipped by earlier cuts. For a current block
ending at virtual index ``v``::

    anchor = min(v, f0)
    shift  = v - anchor
    current block          -> (anchor - 2, anchor - 1, anchor)
    cached frame at v_j    -> max(1, v_j - shift)

A cut pins the active block to ``(v-2, v+delta-1, v+delta)`` in virtual
space and the blocks after it resume at the pre-cut virtual position, so the
jumped block ends up as past context ahead of the new frames.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, HorizonRangeError, ProtocolError

FRAMES_PER_BLOCK = 3
MODES = ("fixed", "unbounded")


@dataclass
class FrameEntry:
    logical_index: int
    keys: list  # per layer, (tokens, heads, head_dim), no temporal rotation
    values: list
    is_sink: bool = False
    segment_id: int = 0
    block: int = 0
    virtual_index: int = 0
    cut_coordinate_override: Optional[int] = None

    @property
    def position(self) -> int:
        """Virtual position used for re-anchoring."""
        if self.cut_coordinate_override is not None:
            return self.cut_coordinate_override
        return self.virtual_index

    @property
    def n_tokens(self) -> int:
        return int(self.keys[0].shape[0]) if self.keys else 0


@dataclass
class KvCache:
    capacity: int = 6
    f0: int = 21
    f_limit: int = 21
    mode: str = "fixed"
    entries: list = field(default_factory=list)
    # frames skipped in virtual space by completed cuts
    offset: int = 0
    segment: int = 0
    active: Optional[tuple] = None
    active_override: Optional[tuple] = None
    active_forced: bool = False
    last_index: int = 0
    counters: dict = field(default_factory=lambda: {"token_writes": 0, "token_ops": 0, "flushes": 0,
                                                    "evicted_frames": 0})

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"cache mode must be one of {MODES}, got {self.mode!r}")
        if self.f0 < FRAMES_PER_BLOCK or self.f0 > self.f_limit:
            raise ConfigError(f"onset f0={self.f0} must lie in [3, f_limit={self.f_limit}]")
        if self.mode == "fixed" and self.capacity < 1:
            raise ConfigError(f"capacity must be >= 1, got {self.capacity}")

    # -- enumeration -------------------------------------------------------

    def resident_frames(self):
        return [e.logical_index for e in self.entries]

    @property
    def sink(self):
        for e in self.entries:
            if e.is_sink:
                return e
        return None

    def non_sink_count(self) -> int:
        return sum(1 for e in self.entries if not e.is_sink)

    def entry(self, logical_index):
        for e in self.entries:
            if e.logical_index == logical_index:
                return e
        raise KeyError(logical_index)

    # -- block lifecycle ---------------------------------------------------

    def begin_block(self, logical_indices):
        """Mark ``logical_indices`` as the block currently being denoised."""
        idx = self._check_block(logical_indices)
        self.active = idx
        self.active_override = None
        self.active_forced = False
        return self

    def append_block(self, block_kv, logical_indices, block=None):
        """Store K/V of a finished block and evict in fixed mode.

        Args:
            block_kv: ``(keys, values)``; each a per-layer list of arrays shaped
                ``(3 * tokens_per_frame, heads, head_dim)``, frame-major.
            logical_indices: the block's three consecutive frame indices.
            block: block number used to group evictions; derived if omitted.
        """
        idx = self._check_block(logical_indices)
        keys, values = block_kv
        if len(keys) != len(values) or not keys:
            raise ProtocolError("append_block needs keys and values for every layer")
        n = keys[0].shape[0]
        if n % FRAMES_PER_BLOCK:
            raise ProtocolError(f"block carries {n} tokens, not divisible into {FRAMES_PER_BLOCK} frames")
        per = n // FRAMES_PER_BLOCK
        if block is None:
            block = (idx[-1] - 1) // FRAMES_PER_BLOCK + 1
        override = self.active_override if self.active == idx else None
        for r, li in enumerate(idx):
            sl = slice(r * per, (r + 1) * per)
            e = FrameEntry(
                logical_index=li,
                keys=[np.array(k[sl]) for k in keys],
                values=[np.array(v[sl]) for v in values],
                is_sink=self.sink is None,
                segment_id=self.segment,
                block=block,
                virtual_index=li - self.offset,
                cut_coordinate_override=None if override is None else override[r],
            )
            self.entries.append(e)
            self.counters["token_writes"] += per * len(keys)
            self.counters["token_ops"] += per * len(keys)
        self.last_index = idx[-1]
        if override is not None:
            # later blocks resume at the pre-cut virtual position
            self.offset += FRAMES_PER_BLOCK
        if self.active == idx:
            self.active = None
            self.active_override = None
            self.active_forced = False
        evicted = self._evict()
        return evicted

    def _check_block(self, logical_indices):
        idx = tuple(int(i) for i in logical_indices)
        if len(idx) != FRAMES_PER_BLOCK or any(b - a != 1 for a, b in zip(idx, idx[1:])):
            raise ProtocolError(f"block indices must be {FRAMES_PER_BLOCK} consecutive integers, got {idx}")
        if idx[0] < 1:
            raise ProtocolError(f"logical indices are 1-based, got {idx}")
        if idx[0] <= self.last_index:
            raise ProtocolError(f"block {idx} does not follow the last committed frame {self.last_index}")
        return idx

    def _evict(self):
        evicted = []
        if self.mode != "fixed":
            return evicted
        while self.non_sink_count() > self.capacity:
            oldest = next(e.block for e in self.entries if not e.is_sink)
            gone = [e for e in self.entries if not e.is_sink and e.block == oldest]
            self.entries = [e for e in self.entries if e.is_sink or e.block != oldest]
            evicted.extend(e.logical_index for e in gone)
        self.counters["evicted_frames"] += len(evicted)
        return evicted

    # -- coordinates -------------------------------------------------------

    def assign_coordinates(self, i=None):
        """Temporal coordinate for every resident frame and the current block.

        Args:
            i: largest logical index of the block being generated. Defaults to
                the active block.

        Returns:
            dict mapping logical index to integer coordinate.
        """
        if i is None:
            if self.active is None:
                raise ProtocolError("assign_coordinates needs an active block or an explicit block end")
            i = self.active[-1]
        i = int(i)
        for e in self.entries:
            if e.logical_index > i:
                raise ProtocolError(f"cache holds frame {e.logical_index} beyond block end {i}")
        v = i - self.offset
        anchor = min(v, self.f0)
        shift = v - anchor
        coords = {e.logical_index: max(1, e.position - shift) for e in self.entries}
        current = tuple(range(i - FRAMES_PER_BLOCK + 1, i + 1))
        if self.active == current and self.active_override is not None:
            cur = [p - shift for p in self.active_override]
        else:
            cur = [anchor - 2, anchor - 1, anchor]
        for li, c in zip(current, cur):
            coords[li] = c
        return coords

    def semanticize(self, i=None):
        """Frames whose coordinate is currently collapsed onto index 1.

        Only meaningful for an unbounded cache, whose history can outgrow
        ``f_limit``; the clamp itself lives in :meth:`assign_coordinates`.
        """
        if self.mode != "unbounded":
            raise ProtocolError("semanticize applies to unbounded caches only")
        if i is None:
            i = self.active[-1] if self.active else self.last_index
        v = int(i) - self.offset
        shift = v - min(v, self.f0)
        return tuple(e.logical_index for e in self.entries if e.position - shift < 1)

    # -- interventions -----------------------------------------------------

    def kv_flush(self):
        """Drop everything except the sink and the newest frame.

        Entries are released by reference; no tokens are recomputed, so the
        ``token_ops`` counter is untouched regardless of occupancy.
        """
        if not self.entries:
            raise ProtocolError("kv_flush on an empty cache")
        if self.non_sink_count() == 0:
            raise ProtocolError("kv_flush needs at least one non-sink frame")
        last = max(e.logical_index for e in self.entries if not e.is_sink)
        keep = [e for e in self.entries if e.is_sink or e.logical_index == last]
        evicted = [e.logical_index for e in self.entries if not (e.is_sink or e.logical_index == last)]
        self.entries = keep
        self.counters["flushes"] += 1
        return evicted

    def apply_cut(self, delta: int, force: bool = False):
        """Jump the last two frames of the active block ``delta`` steps ahead.

        A jump longer than ``f_limit`` leaves the trained horizon and raises
        :class:`HorizonRangeError` unless ``force`` is set.
        """
        if self.active is None:
            raise ProtocolError("apply_cut needs an active block")
        if self.active_override is not None:
            raise ProtocolError(f"block {self.active} was already cut")
        delta = int(delta)
        if delta < 1:
            raise ProtocolError(f"cut delta must be >= 1, got {delta}")
        if delta > self.f_limit and not force:
            raise HorizonRangeError(
                f"cut delta {delta} exceeds the trained horizon f_limit={self.f_limit}; force to extrapolate")
        v = self.active[-1] - self.offset
        self.active_override = (v - 2, v + delta - 1, v + delta)
        self.active_forced = delta > self.f_limit
        self.segment += 1
        return self.active_override

    # -- dumps -------------------------------------------------------------

    def snapshot(self, coords=None):
        """One dict per resident frame, in residency order."""
        rows = []
        for e in self.entries:
            rows.append({
                "logical_index": e.logical_index,
                "coordinate": None if coords is None else int(coords[e.logical_index]),
                "is_sink": e.is_sink,
                "segment_id": e.segment_id,
            })
        return rows


def absolute_coordinates(cache: KvCache, i: int):
    """Reference indexing: every frame sits at its logical index."""
    coords = {e.logical_index: e.logical_index for e in cache.entries}
    for li in range(i - FRAMES_PER_BLOCK + 1, i + 1):
        coords[li] = li
    return coords
