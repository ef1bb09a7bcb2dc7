"""Approximate pseudo-coverage (APC) of visited states.

Each batch of buffered states is embedded with t-SNE, the embedding is
mapped onto a persistent unit-square grid, and occupied cells are voted and
unioned across batches. APC is the occupied fraction of the grid.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import kernels
from .embed import Embedding, TSNEConfig, subsample_buffer, tsne_embed

LEDGER_VERSION = "# drlcov coverage-ledger v1"
LEDGER_FIELDS = ("batch", "episode_start", "episode_end", "new_cells", "cum_occupied", "apc")


@dataclass(frozen=True)
class Limits:
    x_min: float
    x_max: float
    y_min: float
    y_max: float


@dataclass(frozen=True)
class GridSpec:
    cells: int
    limits: Limits

    def __post_init__(self):
        if self.cells < 2:
            raise ValueError(f"grid needs at least 2 cells per axis, got {self.cells}")
        lim = self.limits
        if not (lim.x_max > lim.x_min and lim.y_max > lim.y_min):
            raise ValueError(f"degenerate grid limits {lim}")

    @property
    def cell_size(self) -> tuple[float, float]:
        lim = self.limits
        return ((lim.x_max - lim.x_min) / self.cells, (lim.y_max - lim.y_min) / self.cells)

    @property
    def total_cells(self) -> int:
        return self.cells * self.cells


UNIT_LIMITS = Limits(0.0, 1.0, 0.0, 1.0)


def calculate_limits(points, padding: float = 0.01, degenerate_width: float = 1e-6) -> Limits:
    """Bounding box padded by ``padding`` of the range on each side."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or len(pts) == 0:
        raise ValueError("cannot compute limits of an empty embedding")
    out = []
    for axis in range(2):
        lo, hi = float(pts[:, axis].min()), float(pts[:, axis].max())
        if hi == lo:
            out += [lo - 0.5 * degenerate_width, hi + 0.5 * degenerate_width]
        else:
            pad = padding * (hi - lo)
            out += [lo - pad, hi + pad]
    return Limits(*out)


def create_grid(limits: Limits, cells: int) -> GridSpec:
    return GridSpec(int(cells), limits)


def normalize_embedding(points, limits: Limits) -> np.ndarray:
    """Affine map of the limit rectangle onto the unit square."""
    pts = np.asarray(points, dtype=np.float64)
    lo = np.array([limits.x_min, limits.y_min])
    hi = np.array([limits.x_max, limits.y_max])
    if np.any(pts < lo) or np.any(pts > hi):
        raise ValueError("embedding has points outside the given limits")
    return np.clip((pts - lo) / (hi - lo), 0.0, 1.0)


def histogram_vote(points, cells: int):
    """Occupied cells of a ``cells x cells`` grid on the unit square.

    Cell ``(i, j)`` covers ``[i/G, (i+1)/G) x [j/G, (j+1)/G)``; coordinates
    equal to 1 fall in the last cell. Returns ``(indices (k, 2), counts (k,))``
    with indices sorted lexicographically.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if len(pts) == 0:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64)
    if np.any(pts < 0.0) or np.any(pts > 1.0):
        raise ValueError("histogram_vote expects points in the unit square")
    flat = np.asarray(kernels.vote_flat(pts, int(cells)))
    uniq, counts = np.unique(flat, return_counts=True)
    return np.stack([uniq // cells, uniq % cells], axis=1), counts


@dataclass
class OccupancySet:
    cells: int
    mask: np.ndarray = None

    def __post_init__(self):
        if self.mask is None:
            self.mask = np.zeros((self.cells, self.cells), dtype=bool)

    def __len__(self) -> int:
        return int(self.mask.sum())

    @property
    def total(self) -> int:
        return self.cells * self.cells

    def indices(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in np.argwhere(self.mask)}

    def copy(self) -> "OccupancySet":
        return OccupancySet(self.cells, self.mask.copy())


def accumulate(occ: OccupancySet, new_cells) -> OccupancySet:
    """Union of ``occ`` with ``new_cells`` (k x 2 indices); returns a new set."""
    out = occ.copy()
    idx = np.asarray(new_cells, dtype=np.int64).reshape(-1, 2)
    if len(idx):
        if idx.min() < 0 or idx.max() >= occ.cells:
            raise ValueError("cell index outside the grid")
        out.mask[idx[:, 0], idx[:, 1]] = True
    return out


def compute_apc(occ: OccupancySet) -> float:
    return len(occ) / occ.total


@dataclass(frozen=True)
class CoverageConfig:
    grid_cells: int = 50
    batch_episodes: int = 100
    max_samples: int = 2000
    tsne: TSNEConfig = TSNEConfig()


@dataclass
class LedgerRow:
    batch: int
    episode_start: int
    episode_end: int
    new_cells: int
    cum_occupied: int
    apc: float


@dataclass
class BatchResult:
    row: LedgerRow
    occupancy: OccupancySet
    states: np.ndarray
    embedding: Embedding
    batch_cells: int


class StateBuffer:
    """Visited-state vectors collected over one batch of episodes."""

    def __init__(self, width: int):
        self.width = int(width)
        self._rows: list[np.ndarray] = []

    def append(self, state) -> None:
        self._rows.append(np.asarray(state, dtype=np.float64))

    def extend(self, states) -> None:
        for s in states:
            self.append(s)

    def __len__(self) -> int:
        return len(self._rows)

    def to_array(self) -> np.ndarray:
        if not self._rows:
            return np.zeros((0, self.width))
        return np.vstack(self._rows)

    def reset(self) -> None:
        self._rows = []


def distinct_rows(states, decimals: int = 9) -> np.ndarray:
    """Drop repeated states, keeping first occurrences in order.

    Re-issued start states, and observations that differ only by float noise
    in the controllers, put many copies of one state in a batch. Enough of
    them make the perplexity target unreachable. Rows equal after rounding to
    ``decimals`` count as one state; the noise sits far below the 1e-12 guard
    on squared distances, so the affinities cannot tell such rows apart.
    """
    states = np.asarray(states, dtype=np.float64)
    if len(states) == 0:
        return states
    # row-wise unique compares bytes; adding 0.0 folds -0.0 into 0.0
    key = np.round(states, decimals) + 0.0
    _, first = np.unique(key, axis=0, return_index=True)
    return states[np.sort(first)]


def cells_from_embedding(points, cells: int):
    """Limits -> normalization -> voting for one batch embedding."""
    limits = calculate_limits(points)
    return histogram_vote(normalize_embedding(points, limits), cells)


def assess_batch(buffer, occ: OccupancySet, config: CoverageConfig, rng: np.random.Generator,
                 batch: int = 0, episode_start: int = 0, episode_end: int = 0) -> BatchResult:
    """Embed one batch of states and fold its occupied cells into ``occ``.

    A :class:`StateBuffer` passed in is reset afterwards.
    """
    states = buffer.to_array() if isinstance(buffer, StateBuffer) else np.asarray(buffer, dtype=np.float64)
    states = distinct_rows(states)
    if len(states) < 4:
        raise ValueError(f"batch {batch} holds {len(states)} distinct states; need at least 4")
    sample = subsample_buffer(states, config.max_samples, rng)
    perplexity = min(config.tsne.perplexity, (len(sample) - 1) / 3.0)
    tsne_cfg = config.tsne if perplexity == config.tsne.perplexity else replace(config.tsne, perplexity=perplexity)
    embedding = tsne_embed(sample, tsne_cfg, rng)
    idx, _ = cells_from_embedding(embedding.points, occ.cells)
    new_occ = accumulate(occ, idx)
    row = LedgerRow(batch, episode_start, episode_end, len(new_occ) - len(occ), len(new_occ),
                    compute_apc(new_occ))
    if isinstance(buffer, StateBuffer):
        buffer.reset()
    return BatchResult(row, new_occ, sample, embedding, len(idx))


def recompute_ledger(embeddings, cells: int, episode_ranges) -> list[LedgerRow]:
    """Rebuild ledger rows from stored per-batch embeddings."""
    occ = OccupancySet(cells)
    rows = []
    for k, (points, (start, end)) in enumerate(zip(embeddings, episode_ranges)):
        idx, _ = cells_from_embedding(points, cells)
        new_occ = accumulate(occ, idx)
        rows.append(LedgerRow(k, start, end, len(new_occ) - len(occ), len(new_occ), compute_apc(new_occ)))
        occ = new_occ
    return rows


def write_ledger(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(LEDGER_VERSION + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LEDGER_FIELDS)
        for r in rows:
            writer.writerow([r.batch, r.episode_start, r.episode_end, r.new_cells, r.cum_occupied, repr(r.apc)])


def read_ledger(path) -> list[LedgerRow]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != LEDGER_VERSION:
        raise ValueError(f"{path}: missing ledger version line")
    reader = csv.DictReader(lines[1:])
    return [
        LedgerRow(int(r["batch"]), int(r["episode_start"]), int(r["episode_end"]), int(r["new_cells"]),
                  int(r["cum_occupied"]), float(r["apc"]))
        for r in reader
    ]
