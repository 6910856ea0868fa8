"""Frame-level attention maps and the structural metrics read off them.

``M[t, s]`` sums head-averaged token attention from every query token of
frame ``t`` to every key token of frame ``s``. Dividing by the number of
query tokens per frame makes each row a distribution over frames, which is
the convention all metrics below assume.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import IncompleteTraceError, ProtocolError
from .rope import temporal_logit_profile

SINK_LABEL = 1


@dataclass
class FrameAttentionMap:
    M: np.ndarray
    frame_labels: np.ndarray
    normalized: bool
    flushes: dict = field(default_factory=dict)
    cuts: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return len(self.frame_labels)

    def index(self, label) -> int:
        return int(np.searchsorted(self.frame_labels, label))

    def row_sums(self):
        return self.M.sum(axis=1)


def frame_attention_map(records, *, head=None, normalize=True, flushes=None, cuts=None) -> FrameAttentionMap:
    """Aggregate token attention records of one layer into a T x T map.

    Args:
        records: :class:`~horizon.model.AttentionRecord` objects, one per
            generated block, all from the same layer.
        head: average over heads when None, else use that head only.
        normalize: divide rows by tokens per query frame.
        flushes, cuts: event metadata carried on the map for the metrics.
    """
    records = sorted(records, key=lambda r: r.block)
    if not records:
        raise IncompleteTraceError("no attention records")
    blocks = [r.block for r in records]
    if len({r.layer for r in records}) != 1:
        raise ProtocolError("records mix several layers")
    if blocks != list(range(1, len(blocks) + 1)):
        missing = sorted(set(range(1, max(blocks) + 1)) - set(blocks))
        raise IncompleteTraceError(f"missing attention records for blocks {missing or blocks}")

    labels = np.unique(np.concatenate([r.query_frames for r in records]))
    pos = {int(l): n for n, l in enumerate(labels)}
    T = len(labels)
    M = np.zeros((T, T), dtype=np.float64)
    per_frame = np.zeros(T)
    for r in records:
        w = r.weights.mean(axis=0) if head is None else r.weights[head]
        qi = np.array([pos[int(f)] for f in r.query_frames])
        ki = np.array([pos[int(f)] for f in r.key_frames])
        rows = np.zeros((T, w.shape[1]))
        np.add.at(rows, qi, w.astype(np.float64))
        np.add.at(M.T, ki, rows.T)
        np.add.at(per_frame, qi, 1)
    if normalize:
        M = M / per_frame[:, None]
    return FrameAttentionMap(M, labels, normalize, dict(flushes or {}), dict(cuts or {}))


def trace_attention_map(trace, layer=None, **kw) -> FrameAttentionMap:
    recs = trace.attention if layer is None else [r for r in trace.attention if r.layer == layer]
    return frame_attention_map(recs, flushes=trace.flushes, cuts=trace.cuts, **kw)


def _require_normalized(fmap):
    if not fmap.normalized:
        raise ProtocolError("metric expects a row-normalized map")


def sink_column_mass(fmap: FrameAttentionMap, sink=SINK_LABEL) -> float:
    """Mean attention that query frames after the sink put on the sink."""
    _require_normalized(fmap)
    s = fmap.index(sink)
    rows = fmap.frame_labels > sink
    if not rows.any():
        return 0.0
    return float(fmap.M[rows, s].mean())


def band_mass(fmap: FrameAttentionMap, width: int) -> float:
    _require_normalized(fmap)
    if width < 0:
        raise ValueError(f"width must be >= 0, got {width}")
    lab = fmap.frame_labels
    band = np.abs(lab[:, None] - lab[None, :]) <= width
    return float((fmap.M * band).sum(axis=1).mean())


def flush_suppression(fmap: FrameAttentionMap, flush_frame: int) -> float:
    """Total attention from frames at/after ``flush_frame`` onto flushed frames."""
    if flush_frame not in fmap.flushes:
        raise ProtocolError(f"no flush recorded before frame {flush_frame}")
    evicted = np.isin(fmap.frame_labels, list(fmap.flushes[flush_frame]))
    rows = fmap.frame_labels >= flush_frame
    return float(fmap.M[np.ix_(rows, evicted)].sum())


def flush_redirection(fmap: FrameAttentionMap, flush_frame: int, sink=SINK_LABEL):
    """Compare anchor mass after a flush with intermediate-frame mass before it.

    Returns ``(anchor, intermediate)``: the smallest per-row mass that the
    first post-flush block puts on {sink, last pre-flush frame}, and the
    largest mass any single flushed frame received averaged over all
    pre-flush query rows.
    """
    _require_normalized(fmap)
    if flush_frame not in fmap.flushes:
        raise ProtocolError(f"no flush recorded before frame {flush_frame}")
    lab = fmap.frame_labels
    anchors = np.isin(lab, [sink, flush_frame - 1])
    first = (lab >= flush_frame) & (lab < flush_frame + 3)
    anchor = float(fmap.M[np.ix_(first, anchors)].sum(axis=1).min())
    evicted = np.isin(lab, list(fmap.flushes[flush_frame]))
    pre = lab < flush_frame
    if not evicted.any():
        return anchor, 0.0
    intermediate = float(fmap.M[np.ix_(pre, evicted)].mean(axis=0).max())
    return anchor, intermediate


def cut_disjointness(fmap: FrameAttentionMap, cut_frame: int, rows: str = "jumped", sink=SINK_LABEL) -> float:
    """One minus the mean mass post-cut query frames put on pre-cut, non-sink frames.

    Pre-cut frames are those generated before the cut block. With
    ``rows="jumped"`` the query rows are the cut block's frames whose
    coordinate was advanced; ``rows="segment"`` uses every frame from the
    cut block on, including blocks that resume at the pre-cut position.
    """
    _require_normalized(fmap)
    if cut_frame not in fmap.cuts:
        raise ProtocolError(f"no cut recorded at frame {cut_frame}")
    lab = fmap.frame_labels
    if rows == "jumped":
        post = np.isin(lab, list(fmap.cuts[cut_frame]))
    elif rows == "segment":
        post = lab >= cut_frame
    else:
        raise ValueError(f"rows must be 'jumped' or 'segment', got {rows!r}")
    pre = (lab < cut_frame) & (lab != sink)
    if not post.any():
        return 1.0
    cross = fmap.M[np.ix_(post, pre)].sum(axis=1).mean()
    return float(min(1.0, max(0.0, 1.0 - cross)))


def row_argmax_labels(fmap: FrameAttentionMap):
    return fmap.frame_labels[np.argmax(fmap.M, axis=1)]


# -- probe -----------------------------------------------------------------

DEFAULT_PROBE_PAIR = 2
DEFAULT_PROBE_STRENGTH = 2000.0


def probe_vector(head_dim, table, pair=DEFAULT_PROBE_PAIR, strength=DEFAULT_PROBE_STRENGTH):
    """Constant vector with all energy on one temporal rotation pair.

    Its squared norm is ``strength``, so the probe logit at coordinate
    distance ``d`` is ``strength * cos(d * freqs_f[pair])``.
    """
    if not 0 <= pair < table.pairs_f:
        raise ValueError(f"probe pair {pair} outside the {table.pairs_f} temporal pairs")
    v = np.zeros(head_dim, dtype=np.float32)
    v[2 * pair] = np.sqrt(strength)
    return v


def probe_logit(distance, vector, table):
    """Closed-form probe logit ``g(distance)``."""
    sf, _, _ = table.slices()
    return temporal_logit_profile(np.asarray(vector)[sf], table.freqs_f, distance)


def rope_probe_map(config, schedule=None, pair=None, strength=None, return_trace=False):
    """Run a rollout whose capture layer uses a constant probe query/key.

    Attention at that layer then depends only on the coordinate trace, so
    the map's structure can be predicted exactly from :func:`probe_logit`.
    """
    from .engine import build_engine
    from .model import Probe
    from .rope import build_frequencies

    mc = config.model_config()
    table = build_frequencies(mc.head_dim, mc.rope_split, mc.rope_base)
    layer = mc.layers // 2 if config.capture_layer is None else config.capture_layer
    vec = probe_vector(mc.head_dim, table,
                       config.probe_pair if pair is None else pair,
                       config.probe_strength if strength is None else strength)
    engine = build_engine(config, probe=Probe(vec, layer))
    trace = engine.rollout(config.n_blocks, config.schedule if schedule is None else schedule)
    fmap = trace_attention_map(trace)
    return (fmap, trace) if return_trace else fmap
