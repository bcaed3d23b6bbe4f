"""Periodized orthogonal discrete wavelet transform.

Two independent routes compute the same transform:

* :func:`dwt` runs the classic filter bank (circular filtering followed by
  down-sampling by two), and
* :func:`build_dwt_matrices` writes every level out as an explicit square
  matrix, which is what the crossbar executes.

Coefficient layout for ``levels = L``: ``[d1, d2, ..., dL, aL]`` where ``d1``
is the finest detail band (length ``n/2``) and ``aL`` the final
approximation (length ``n / 2**L``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SQRT2 = np.sqrt(2.0)

# analysis low-pass taps, h[0] applied to x[2r]
LOWPASS = {
    "haar": np.array([1.0, 1.0]) / _SQRT2,
    # Daubechies, four vanishing moments (8 taps), minimum-phase factor
    "db4": np.array([
        0.23037781330889650086,
        0.71484657055291564709,
        0.63088076792985890788,
        -0.027983769416859854211,
        -0.18703481171909308408,
        0.030841381835560763627,
        0.032883011666885199735,
        -0.010597401785069032105,
    ]),
}


def highpass(h):
    """Quadrature-mirror partner ``g[k] = (-1)**k * h[N-1-k]``."""
    n = len(h)
    return np.array([(-1) ** k * h[n - 1 - k] for k in range(n)])


@dataclass(frozen=True)
class WaveletSpec:
    family: str = "haar"
    levels: int = 5

    def taps(self):
        try:
            h = LOWPASS[self.family]
        except KeyError:
            raise ValueError(f"unknown wavelet family {self.family!r}") from None
        return h, highpass(h)

    def check_length(self, n):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if n % (2 ** self.levels):
            raise ValueError(f"length {n} is not divisible by 2**{self.levels}")


@dataclass(frozen=True)
class DwtMatrices:
    """One square analysis matrix per level.

    ``levels[l]`` maps the length-``n / 2**l`` approximation to its next
    approximation (top half of the output) and detail (bottom half).
    """

    spec: WaveletSpec
    n: int
    levels: tuple

    def __len__(self):
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)

    def __getitem__(self, i):
        return self.levels[i]


def _level_matrix(h, g, m):
    mat = np.zeros((m, m))
    half = m // 2
    for r in range(half):
        for k in range(len(h)):
            c = (2 * r + k) % m
            mat[r, c] += h[k]
            mat[half + r, c] += g[k]
    return mat


def build_dwt_matrices(spec: WaveletSpec, n: int) -> DwtMatrices:
    spec.check_length(n)
    h, g = spec.taps()
    mats = tuple(_level_matrix(h, g, n >> lvl) for lvl in range(spec.levels))
    return DwtMatrices(spec=spec, n=n, levels=mats)


def _analysis_step(a, h, g):
    # a: (..., m); circular correlation with the taps, keeping even shifts
    m = a.shape[-1]
    lo = np.zeros(a.shape[:-1] + (m // 2,))
    hi = np.zeros_like(lo)
    for k in range(len(h)):
        shifted = np.roll(a, -k, axis=-1)[..., ::2]
        lo += h[k] * shifted
        hi += g[k] * shifted
    return lo, hi


def _synthesis_step(lo, hi, h, g):
    m = lo.shape[-1] * 2
    out = np.zeros(lo.shape[:-1] + (m,))
    up_lo = np.zeros_like(out)
    up_hi = np.zeros_like(out)
    up_lo[..., ::2] = lo
    up_hi[..., ::2] = hi
    for k in range(len(h)):
        out += np.roll(h[k] * up_lo + g[k] * up_hi, k, axis=-1)
    return out


def dwt(x, spec: WaveletSpec = WaveletSpec()):
    """Multi-level DWT of a snippet or of each row of a 2-D array."""
    x = np.asarray(x, dtype=np.float64)
    spec.check_length(x.shape[-1])
    h, g = spec.taps()
    details = []
    a = x
    for _ in range(spec.levels):
        a, d = _analysis_step(a, h, g)
        details.append(d)
    return np.concatenate(details + [a], axis=-1)


def idwt(coeffs, spec: WaveletSpec = WaveletSpec()):
    """Inverse of :func:`dwt`."""
    c = np.asarray(coeffs, dtype=np.float64)
    n = c.shape[-1]
    spec.check_length(n)
    h, g = spec.taps()
    sizes = [n >> (lvl + 1) for lvl in range(spec.levels)]
    bounds = np.cumsum(sizes)
    details = np.split(c[..., :bounds[-1]], bounds[:-1], axis=-1)
    a = c[..., bounds[-1]:]
    for d in reversed(details):
        a = _synthesis_step(a, d, h, g)
    return a


def dwt_by_matrices(x, mats: DwtMatrices):
    """Same transform as :func:`dwt`, as a cascade of matrix products."""
    a = np.asarray(x, dtype=np.float64)
    details = []
    for mat in mats:
        y = a @ mat.T
        half = mat.shape[0] // 2
        a, d = y[..., :half], y[..., half:]
        details.append(d)
    return np.concatenate(details + [a], axis=-1)


def idwt_by_matrices(coeffs, mats: DwtMatrices):
    c = np.asarray(coeffs, dtype=np.float64)
    sizes = [m.shape[0] // 2 for m in mats]
    bounds = np.cumsum(sizes)
    details = np.split(c[..., :bounds[-1]], bounds[:-1], axis=-1)
    a = c[..., bounds[-1]:]
    for mat, d in zip(reversed(mats.levels), reversed(details)):
        a = np.concatenate([a, d], axis=-1) @ mat
    return a
