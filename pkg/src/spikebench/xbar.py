"""Semi-passive RRAM crossbar simulation for the DWT's matrix products.

Weights are stored differentially, ``w = s * (g_plus - g_minus)``, on 8x8
tiles with one scale ``s`` per tile. All-zero 8x8 blocks of a matrix are not
mapped. Nonidealities: conductance quantization, Gaussian programming noise,
a lumped line-resistance attenuation and multiplicative read noise on each
column current.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import CapacityError
from .wavelet import DwtMatrices

TILE = 8
MAX_TILES = 64


@dataclass(frozen=True)
class DeviceModel:
    g_min: float = 1e-6
    g_max: float = 100e-6
    n_levels: int = 256
    program_noise_sigma: float = 0.01
    read_noise_sigma: float = 0.005
    line_resistance_ohm: float = 1.0

    def __post_init__(self):
        if not 0 <= self.g_min < self.g_max:
            raise ValueError("need 0 <= g_min < g_max")
        if self.n_levels < 2:
            raise ValueError("n_levels must be >= 2")
        if self.program_noise_sigma < 0 or self.read_noise_sigma < 0 or self.line_resistance_ohm < 0:
            raise ValueError("noise sigmas and line resistance must be >= 0")

    @classmethod
    def ideal(cls, **overrides):
        """Fine quantization, no noise, no line resistance."""
        params = dict(n_levels=2**30, program_noise_sigma=0.0, read_noise_sigma=0.0, line_resistance_ohm=0.0)
        params.update(overrides)
        return cls(**params)

    @classmethod
    def from_dict(cls, d):
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)

    @property
    def g_range(self):
        return self.g_max - self.g_min


@dataclass(frozen=True)
class TileMap:
    matrix: int
    row0: int
    col0: int
    rows: int
    cols: int
    tile: int
    scale: float


@dataclass
class TileGrid:
    tiles: list = field(default_factory=list)  # (g_plus, g_minus) pairs, each TILE x TILE
    tile_rows: int = TILE
    tile_cols: int = TILE
    max_tiles: int = MAX_TILES


@dataclass
class CrossbarState:
    grid: TileGrid
    mapping: list
    device: DeviceModel
    seed: int
    shapes: list

    @property
    def mapped_tiles(self):
        return len(self.grid.tiles)

    def tiles_for(self, matrix):
        return [m for m in self.mapping if m.matrix == matrix]


def _blocks(mat):
    rows, cols = mat.shape
    for r0 in range(0, rows, TILE):
        for c0 in range(0, cols, TILE):
            block = mat[r0:r0 + TILE, c0:c0 + TILE]
            if np.any(block != 0):
                yield r0, c0, block


def required_tiles(matrices):
    return sum(1 for mat in matrices for _ in _blocks(np.asarray(mat)))


def _quantize(g, device):
    step = device.g_range / (device.n_levels - 1)
    return device.g_min + np.round((g - device.g_min) / step) * step


def program(matrices, device: DeviceModel = DeviceModel(), seed: int = 0, max_tiles: int = MAX_TILES) -> CrossbarState:
    """Map every nonzero 8x8 block of ``matrices`` onto its own tile.

    ``matrices`` is a :class:`~spikebench.wavelet.DwtMatrices` or any
    sequence of 2-D arrays. Raises :class:`CapacityError` when more than
    ``max_tiles`` tiles would be needed.
    """
    mats = [np.asarray(m, dtype=np.float64) for m in (matrices.levels if isinstance(matrices, DwtMatrices) else matrices)]
    need = required_tiles(mats)
    if need > max_tiles:
        raise CapacityError(need, max_tiles)
    rng = np.random.default_rng(seed)
    grid = TileGrid(max_tiles=max_tiles)
    mapping = []
    for mi, mat in enumerate(mats):
        for r0, c0, block in _blocks(mat):
            rows, cols = block.shape
            w = np.zeros((TILE, TILE))
            w[:rows, :cols] = block
            scale = float(np.max(np.abs(w))) / device.g_range
            g_plus = device.g_min + np.where(w > 0, w, 0.0) / scale
            g_minus = device.g_min + np.where(w < 0, -w, 0.0) / scale
            pair = []
            for g in (g_plus, g_minus):
                g = _quantize(g, device)
                if device.program_noise_sigma > 0:
                    g = g + rng.normal(0.0, device.program_noise_sigma * device.g_range, size=g.shape)
                pair.append(np.clip(g, device.g_min, device.g_max))
            mapping.append(TileMap(mi, r0, c0, rows, cols, len(grid.tiles), scale))
            grid.tiles.append(tuple(pair))
    return CrossbarState(grid=grid, mapping=mapping, device=device, seed=seed, shapes=[m.shape for m in mats])


def encoded_weights(state: CrossbarState):
    """Dense matrices as actually stored, ``s * (g_plus - g_minus)``."""
    out = [np.zeros(shape) for shape in state.shapes]
    for m in state.mapping:
        g_plus, g_minus = state.grid.tiles[m.tile]
        w = m.scale * (g_plus - g_minus)
        out[m.matrix][m.row0:m.row0 + m.rows, m.col0:m.col0 + m.cols] = w[:m.rows, :m.cols]
    return out


_POS = np.add.outer(np.arange(TILE), np.arange(TILE)).astype(np.float64)


def _attenuate(g, r_line):
    if r_line == 0:
        return g
    return g / (1.0 + r_line * _POS * g)


def vmm(state: CrossbarState, v, seed: int | None = None, matrix: int = 0):
    """Analogue product of mapped matrix ``matrix`` with ``v``.

    ``v`` is one input vector or a 2-D batch with one vector per row. With
    read noise off and ``r_line == 0`` this reduces to the encoded weights
    times ``v``.
    """
    v = np.asarray(v, dtype=np.float64)
    rows, cols = state.shapes[matrix]
    if v.shape[-1] != cols:
        raise ValueError(f"input length {v.shape[-1]} does not match matrix {matrix} width {cols}")
    batch = v.reshape(-1, cols)
    out = np.zeros((batch.shape[0], rows))
    dev = state.device
    rng = np.random.default_rng(state.seed if seed is None else seed)
    for m in state.tiles_for(matrix):
        vb = np.zeros((batch.shape[0], TILE))
        vb[:, :m.cols] = batch[:, m.col0:m.col0 + m.cols]
        currents = []
        for g in state.grid.tiles[m.tile]:
            i = vb @ _attenuate(g, dev.line_resistance_ohm).T
            if dev.read_noise_sigma > 0:
                i = i * (1.0 + dev.read_noise_sigma * rng.standard_normal(i.shape))
            currents.append(i)
        diff = m.scale * (currents[0] - currents[1])
        out[:, m.row0:m.row0 + m.rows] += diff[:, :m.rows]
    return out.reshape(v.shape[:-1] + (rows,))


def dwt_on_crossbar(snippets, state: CrossbarState, seed: int | None = None):
    """Run the mapped level operators in sequence, feeding approximations forward.

    Returns ``(coeffs, telemetry)`` with the coefficient layout of
    :func:`spikebench.wavelet.dwt`; telemetry counts tile activations and
    level VMMs over all input snippets.
    """
    x = np.asarray(snippets, dtype=np.float64)
    n = state.shapes[0][1]
    if x.shape[-1] != n:
        raise ValueError(f"crossbar was programmed for length {n}, got {x.shape[-1]}")
    base = state.seed if seed is None else seed
    n_vec = int(np.prod(x.shape[:-1], dtype=np.int64)) if x.ndim > 1 else 1
    a = x
    details = []
    activations = 0
    for lvl in range(len(state.shapes)):
        lvl_seed = np.random.SeedSequence([base, lvl]).generate_state(1)[0]
        y = vmm(state, a, seed=int(lvl_seed), matrix=lvl)
        half = state.shapes[lvl][0] // 2
        a, d = y[..., :half], y[..., half:]
        details.append(d)
        activations += len(state.tiles_for(lvl)) * n_vec
    coeffs = np.concatenate(details + [a], axis=-1)
    telemetry = {
        "tile_activations": int(activations),
        "vmm_count": int(len(state.shapes) * n_vec),
        "mapped_tiles": int(state.mapped_tiles),
    }
    return coeffs, telemetry


def telemetry_json(telemetry):
    return json.dumps(telemetry, sort_keys=True)


def device_dict(device: DeviceModel):
    return asdict(device)


def quantization_rms_error(matrices, device: DeviceModel):
    """Relative RMS error of the encoded weights against the targets."""
    mats = [np.asarray(m) for m in (matrices.levels if isinstance(matrices, DwtMatrices) else matrices)]
    state = program(mats, device, seed=0, max_tiles=max(required_tiles(mats), 1))
    enc = encoded_weights(state)
    num = sum(float(np.sum((e - t) ** 2)) for e, t in zip(enc, mats))
    den = sum(float(np.sum(t**2)) for t in mats)
    return math.sqrt(num / den)
