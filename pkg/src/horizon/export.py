"""File formats for attention maps and traces.

CSV
    First line: frame labels joined by commas. Then one line per query
    frame, in label order, holding that row of ``M`` as ``%.9g`` values.

PGM (plain, P2)
    ``P2`` / ``<T> <T>`` / ``255`` header lines, then one line per row with
    space-separated integers ``floor(255 * M / max(M) + 0.5)`` (all zeros
    when ``max(M) == 0``). Files end with a newline.

JSON lines
    One compact JSON object per line, keys in insertion order.
"""

import json
from pathlib import Path

import numpy as np


def map_to_csv(fmap) -> str:
    lines = [",".join(str(int(l)) for l in fmap.frame_labels)]
    for row in fmap.M:
        lines.append(",".join(f"{v:.9g}" for v in row))
    return "\n".join(lines) + "\n"


def read_csv_map(text: str):
    rows = [ln for ln in text.splitlines() if ln]
    labels = np.array([int(x) for x in rows[0].split(",")])
    M = np.array([[float(x) for x in ln.split(",")] for ln in rows[1:]])
    if M.shape != (len(labels), len(labels)):
        raise ValueError(f"csv map is {M.shape}, expected {len(labels)} square")
    return labels, M


def map_to_pixels(M) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    top = M.max() if M.size else 0.0
    if top <= 0:
        return np.zeros(M.shape, dtype=np.int64)
    return np.floor(255.0 * M / top + 0.5).astype(np.int64)


def map_to_pgm(fmap) -> str:
    px = map_to_pixels(fmap.M)
    h, w = px.shape
    lines = ["P2", f"{w} {h}", "255"]
    lines.extend(" ".join(str(int(v)) for v in row) for row in px)
    return "\n".join(lines) + "\n"


def read_pgm(text: str) -> np.ndarray:
    tokens = []
    for ln in text.splitlines():
        ln = ln.split("#", 1)[0]
        tokens.extend(ln.split())
    if not tokens or tokens[0] != "P2":
        raise ValueError("not a plain PGM (P2) file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    vals = np.array([int(t) for t in tokens[4:]], dtype=np.int64)
    if vals.size != w * h:
        raise ValueError(f"PGM holds {vals.size} pixels, header says {w}x{h}")
    if vals.min(initial=0) < 0 or vals.max(initial=0) > maxval:
        raise ValueError("PGM pixel outside [0, maxval]")
    return vals.reshape(h, w)


def read_jsonl(text: str):
    return [json.loads(ln) for ln in text.splitlines() if ln.strip()]


def write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
