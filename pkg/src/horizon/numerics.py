"""Small dense-array helpers for the toy transformer.

Arrays are plain ``numpy.ndarray`` objects in float32. The Gaussian sampler
does not use numpy's bit generators: it is a counter-based SplitMix64 stream
followed by Box-Muller, so the exact values are reproducible from the
description below in any language.

Generator
---------
For seed ``s`` (reduced mod 2**64) and counter ``k = 0, 1, 2, ...``::

    x_k = mix64(s + (k + 1) * 0x9E3779B97F4A7C15)          (mod 2**64)
    mix64(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
              z ^= z >> 27; z *= 0x94D049BB133111EB
              z ^= z >> 31
    u_k = (x_k >> 11) * 2**-53                              in [0, 1)

Normals are produced in pairs from ``(u_{2m}, u_{2m+1})``::

    r = sqrt(-2 ln(1 - u_{2m})),  theta = 2 pi u_{2m+1}
    z_{2m} = r cos(theta),  z_{2m+1} = r sin(theta)

computed in float64 and rounded to float32, filled in row-major order.
"""

import math

import numpy as np

from .errors import ShapeError

DTYPE = np.float32

GOLDEN = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1


def mix64(z):
    """SplitMix64 finalizer. Works on python ints and uint64 arrays."""
    if isinstance(z, np.ndarray):
        z = z.astype(np.uint64, copy=True)
        z ^= z >> np.uint64(30)
        z *= np.uint64(0xBF58476D1CE4E5B9)
        z ^= z >> np.uint64(27)
        z *= np.uint64(0x94D049BB133111EB)
        z ^= z >> np.uint64(31)
        return z
    z &= MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & MASK64
    z ^= z >> 31
    return z


def derive_seed(*parts: int) -> int:
    """Fold integers into one 64-bit seed, e.g. ``derive_seed(seed, block)``."""
    h = 0
    for p in parts:
        h = mix64((h ^ (int(p) & MASK64)) + GOLDEN)
    return h


def uniform_stream(n: int, seed: int) -> np.ndarray:
    """First ``n`` uniforms in [0, 1) of the SplitMix64 stream for ``seed``."""
    k = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = mix64(np.uint64(int(seed) & MASK64) + k * np.uint64(GOLDEN))
    return (x >> np.uint64(11)).astype(np.float64) * 2.0**-53


def seeded_gaussian(shape, seed: int) -> np.ndarray:
    """Standard normal float32 array, bit-identical for a fixed (shape, seed)."""
    shape = (int(shape),) if np.isscalar(shape) else tuple(int(s) for s in shape)
    n = math.prod(shape)
    m = (n + 1) // 2
    u = uniform_stream(2 * m, seed).reshape(m, 2)
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    theta = 2.0 * np.pi * u[:, 1]
    z = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1).reshape(-1)
    return z[:n].astype(DTYPE).reshape(shape)


def matmul(a, b):
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if a.ndim < 1 or b.ndim < 1 or a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ShapeError(f"matmul: inner extents differ, {a.shape} x {b.shape}")
    return np.matmul(a, b)


def softmax_rows(a, axis: int = -1):
    """Softmax along ``axis`` with row-max subtraction."""
    a = np.asarray(a, dtype=DTYPE)
    z = a - a.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def rms_norm(a, gain, eps: float = 1e-6):
    a = np.asarray(a, dtype=DTYPE)
    gain = np.asarray(gain, dtype=DTYPE)
    if a.shape[-1] != gain.shape[-1]:
        raise ShapeError(f"rms_norm: gain has {gain.shape[-1]} entries, input has {a.shape[-1]}")
    rms = np.sqrt(np.mean(a * a, axis=-1, keepdims=True)) + DTYPE(eps)
    return (a / rms * gain).astype(DTYPE)


def gelu(x):
    x = np.asarray(x, dtype=DTYPE)
    return (0.5 * x * (1.0 + np.tanh(0.7978845608 * (x + 0.044715 * x**3)))).astype(DTYPE)
