"""Lag binning and sparse design matrices for the discretized likelihood.

For grid time t_l and input channel i, entry (l, i*N + k) of H counts the
channel-i events whose lag t_l - sigma falls in [delta_k, delta_{k+1});
an event exactly at t_l contributes nothing (non-anticipation), and a lag of
exactly A lands in the last bin.  Z carries the same counts pushed through
the basis evaluations at the bin lags.  Column blocks are channel-major.
Binning compares lags in exact floating point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .events import TimeGrid, Trial
from .sparse import SparseCsr, from_triplets
from .splines import SplineBasis, eval_compact

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DeltaGrid:
    """Lag grid 0 = delta_0 < ... < delta_N = A; bins are the N gaps."""

    points: np.ndarray

    @property
    def n_bins(self) -> int:
        return len(self.points) - 1

    @property
    def support(self) -> float:
        return float(self.points[-1])

    @property
    def bin_lags(self) -> np.ndarray:
        """delta_0 .. delta_{N-1}: the lags at which filters are evaluated."""
        return self.points[:-1]


def make_delta_grid(support: float, n_bins: int) -> DeltaGrid:
    if n_bins < 2:
        raise ValueError("need at least 2 lag bins")
    return DeltaGrid(points=np.linspace(0.0, support, n_bins + 1))


@dataclass(frozen=True)
class ModelMatrices:
    """Per-trial precomputations consumed by the objective (H and/or Z)."""

    grid: TimeGrid
    delta: DeltaGrid
    n_channels: int
    h: SparseCsr | None = None
    z: SparseCsr | None = None


def _window_rows(points: np.ndarray, sigma: float, support: float) -> tuple[int, int]:
    """Row range [lo, hi) with sigma < t_l <= sigma + support (float-safe upper pad)."""
    lo = np.searchsorted(points, sigma, side="right")
    hi = np.searchsorted(points, sigma + support, side="right")
    while hi < len(points) and points[hi] - sigma <= support:
        hi += 1
    return int(lo), int(hi)


def build_h(
    trial: Trial, grid: TimeGrid, delta: DeltaGrid, channels: list[str]
) -> SparseCsr:
    """Sparse (n+1) x (p*N) lag-count matrix for one trial."""
    n_bins = delta.n_bins
    support = delta.support
    points = grid.points
    rows_out, cols_out = [], []
    for chan_pos, channel in enumerate(channels):
        for sigma in trial.events[channel]:
            lo, hi = _window_rows(points, sigma, support)
            if lo >= hi:
                continue
            rows = np.arange(lo, hi)
            lags = points[lo:hi] - sigma
            ok = (lags > 0.0) & (lags <= support)
            rows, lags = rows[ok], lags[ok]
            bins = np.searchsorted(delta.points, lags, side="right") - 1
            bins[lags == support] = n_bins - 1  # closed last bin
            rows_out.append(rows)
            cols_out.append(chan_pos * n_bins + bins)
    if rows_out:
        rows = np.concatenate(rows_out)
        cols = np.concatenate(cols_out)
    else:
        rows = np.empty(0, dtype=np.int64)
        cols = np.empty(0, dtype=np.int64)
    h = from_triplets(grid.n + 1, len(channels) * n_bins, (rows, cols, np.ones(len(rows))))
    multi = int(np.count_nonzero(h.values > 1.0))
    if multi:
        log.warning(
            "lag grid too coarse: %d bin counts exceed 1 (intended to be 0/1 only)", multi
        )
    return h


def multi_hit_count(h: SparseCsr) -> int:
    """Number of stored lag counts above 1 (grid-fineness diagnostic)."""
    return int(np.count_nonzero(h.values > 1.0))


def build_z(h: SparseCsr, basis_eval: np.ndarray, n_channels: int) -> SparseCsr:
    """Z from H: per channel block, Z_{lj} = sum_k h_{lk} B_j(delta_k)."""
    n_bins, q = basis_eval.shape
    if h.ncols != n_channels * n_bins:
        raise ValueError("H column count does not match channels x bins")
    h_rows = np.repeat(np.arange(h.nrows), np.diff(h.row_ptr))
    chan = h.col_idx // n_bins
    bins = h.col_idx % n_bins
    rows_out, cols_out, vals_out = [], [], []
    # expand every H entry through the <= 4 nonzeros of its bin's basis row
    nz_cols = [np.flatnonzero(basis_eval[k]) for k in range(n_bins)]
    order = np.argsort(bins, kind="stable")
    sorted_bins = bins[order]
    group_starts = np.concatenate(
        [[0], np.flatnonzero(np.diff(sorted_bins)) + 1, [len(sorted_bins)]]
    )
    for g in range(len(group_starts) - 1):
        sel = order[group_starts[g] : group_starts[g + 1]]
        if len(sel) == 0:
            continue
        k = int(bins[sel[0]])
        js = nz_cols[k]
        if len(js) == 0:
            continue
        bvals = basis_eval[k, js]
        rows_out.append(np.repeat(h_rows[sel], len(js)))
        cols_out.append(
            (chan[sel][:, None] * q + js[None, :]).ravel()
        )
        vals_out.append((h.values[sel][:, None] * bvals[None, :]).ravel())
    if rows_out:
        rows = np.concatenate(rows_out)
        cols = np.concatenate(cols_out)
        vals = np.concatenate(vals_out)
    else:
        rows = np.empty(0, dtype=np.int64)
        cols = np.empty(0, dtype=np.int64)
        vals = np.empty(0)
    return from_triplets(h.nrows, n_channels * q, (rows, cols, vals))


def build_z_direct(
    trial: Trial, grid: TimeGrid, basis: SplineBasis, channels: list[str]
) -> SparseCsr:
    """Z evaluated at exact lags t_l - sigma instead of binned lags."""
    support = basis.support
    q = basis.q
    points = grid.points
    rows_out, cols_out, vals_out = [], [], []
    for chan_pos, channel in enumerate(channels):
        for sigma in trial.events[channel]:
            lo, hi = _window_rows(points, sigma, support)
            if lo >= hi:
                continue
            rows = np.arange(lo, hi)
            lags = points[lo:hi] - sigma
            ok = (lags > 0.0) & (lags <= support)
            rows, lags = rows[ok], lags[ok]
            if len(rows) == 0:
                continue
            first, bvals = eval_compact(basis, lags)
            width = bvals.shape[1]
            rows_out.append(np.repeat(rows, width))
            cols_out.append(
                (chan_pos * q + first[:, None] + np.arange(width)[None, :]).ravel()
            )
            vals_out.append(bvals.ravel())
    if rows_out:
        rows = np.concatenate(rows_out)
        cols = np.concatenate(cols_out)
        vals = np.concatenate(vals_out)
    else:
        rows = np.empty(0, dtype=np.int64)
        cols = np.empty(0, dtype=np.int64)
        vals = np.empty(0)
    return from_triplets(grid.n + 1, len(channels) * q, (rows, cols, vals))
