"""Shared data model: ragged time series panels and sparse count bags."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

COUNT_DTYPE = np.uint32
_COUNT_MAX = int(np.iinfo(COUNT_DTYPE).max)


class StructuralError(ValueError):
    """Raised when a container violates its structural invariants."""


class CountOverflowError(OverflowError):
    """Raised when a merged count does not fit in the count dtype."""


def as_signal(values: Iterable[float]) -> np.ndarray:
    """Return `values` as a read-only float64 signal, NaN marking missing observations."""
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if np.isinf(arr).any():
        raise StructuralError("signals may not contain infinities")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """One series made of ``k`` signals, possibly of different lengths."""

    signals: tuple[np.ndarray, ...]

    def __init__(self, signals: Sequence[Iterable[float]]):
        sigs = tuple(as_signal(s) for s in signals)
        if not sigs:
            raise StructuralError("a time series needs at least one signal")
        object.__setattr__(self, "signals", sigs)

    @property
    def k(self) -> int:
        return len(self.signals)

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.signals)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TimeSeries) or self.k != other.k:
            return NotImplemented if not isinstance(other, TimeSeries) else False
        return all(
            a.shape == b.shape and np.array_equal(a, b, equal_nan=True)
            for a, b in zip(self.signals, other.signals)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class TimeSeriesDataset:
    """A collection of ``n`` time series with optional per-series targets."""

    series: tuple[TimeSeries, ...]
    labels: tuple[Any, ...] | None = None

    def __init__(self, series: Sequence[TimeSeries | Sequence[Iterable[float]]], labels=None):
        items = tuple(s if isinstance(s, TimeSeries) else TimeSeries(s) for s in series)
        if labels is not None:
            labels = tuple(labels)
            if len(labels) != len(items):
                raise StructuralError(
                    f"got {len(labels)} labels for {len(items)} series"
                )
        object.__setattr__(self, "series", items)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return len(self.series)

    def __len__(self) -> int:
        return len(self.series)

    def __getitem__(self, i: int) -> TimeSeries:
        return self.series[i]

    def max_length(self) -> int:
        return max((m for ts in self.series for m in ts.lengths), default=0)


@dataclass(frozen=True)
class SparseBag:
    """Finalized COO count matrix: sorted by (row, col), no duplicates, counts >= 1."""

    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    shape: tuple[int, int]

    @property
    def nnz(self) -> int:
        return int(self.vals.shape[0])

    @property
    def n(self) -> int:
        return self.shape[0]

    @property
    def h(self) -> int:
        return self.shape[1]

    def triplets(self) -> list[tuple[int, int, int]]:
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.vals.tolist()))

    def to_scipy(self):
        from scipy import sparse

        return sparse.csr_matrix(
            (self.vals, (self.rows, self.cols)), shape=self.shape, dtype=COUNT_DTYPE
        )

    def toarray(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.int64)
        out[self.rows, self.cols] = self.vals
        return out

    def row(self, i: int) -> dict[int, int]:
        lo, hi = np.searchsorted(self.rows, [i, i + 1])
        return dict(zip(self.cols[lo:hi].tolist(), self.vals[lo:hi].tolist()))

    def select_columns(self, columns: np.ndarray) -> "SparseBag":
        """Keep only `columns` (ascending), renumbered to 0..len(columns)-1."""
        columns = np.asarray(columns, dtype=np.int64)
        remap = np.full(self.h, -1, dtype=np.int64)
        remap[columns] = np.arange(columns.size)
        keep = remap[self.cols] >= 0
        return SparseBag(
            self.rows[keep], remap[self.cols[keep]], self.vals[keep], (self.n, int(columns.size))
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparseBag):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.vals, other.vals)
        )

    __hash__ = None  # type: ignore[assignment]


def bag_finalize(triplets, shape: tuple[int, int]) -> SparseBag:
    """Merge unordered ``(row, col, count)`` triplets into a :class:`SparseBag`.

    Duplicate coordinates are summed and the result is sorted by (row, col), so
    any ordering or partition of the same triplets yields the same bag.

    Parameters
    ----------
    triplets : array-like of shape (N, 3) or sequence of 3-tuples
    shape : (n, h)

    Raises
    ------
    StructuralError
        On out-of-range coordinates or non-positive counts.
    CountOverflowError
        If a merged count exceeds the 32-bit unsigned range.
    """
    n, h = int(shape[0]), int(shape[1])
    arr = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
    rows, cols, vals = arr[:, 0], arr[:, 1], arr[:, 2]
    return _finalize_arrays(rows, cols, vals, (n, h))


def _finalize_arrays(rows, cols, vals, shape) -> SparseBag:
    n, h = shape
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.int64)
    if rows.size:
        if cols.min() < 0 or cols.max() >= h:
            raise StructuralError(f"column index out of range for h={h}")
        if rows.min() < 0 or rows.max() >= n:
            raise StructuralError(f"row index out of range for n={n}")
        if vals.min() < 1:
            raise StructuralError("triplet counts must be >= 1")
    lin = rows * h + cols
    uniq, inverse = np.unique(lin, return_inverse=True)
    sums = np.zeros(uniq.size, dtype=np.uint64)
    np.add.at(sums, inverse, vals.astype(np.uint64))
    if sums.size and int(sums.max()) > _COUNT_MAX:
        raise CountOverflowError("merged count exceeds 2**32 - 1")
    if h:
        out_rows, out_cols = np.divmod(uniq, h)
    else:
        out_rows = out_cols = np.zeros(0, dtype=np.int64)
    return SparseBag(
        out_rows.astype(np.int64), out_cols.astype(np.int64), sums.astype(COUNT_DTYPE), (n, h)
    )


def empty_bag(n: int, h: int) -> SparseBag:
    z = np.zeros(0, dtype=np.int64)
    return SparseBag(z, z.copy(), np.zeros(0, dtype=COUNT_DTYPE), (n, h))


def bag_stats(bag: SparseBag) -> dict[str, float | int]:
    cells = bag.n * bag.h
    return {
        "nnz": bag.nnz,
        "density": bag.nnz / cells if cells else 0.0,
        "distinct_words": int(np.unique(bag.cols).size),
    }


@dataclass(frozen=True)
class Vocabulary:
    """Frozen, sorted map from word key ``(config_id, signal_id, code)`` to column.

    Columns follow the lexicographic order of the key triple. Because the
    config id leads, each configuration owns one contiguous column range.
    """

    keys: np.ndarray  # (h, 3) int64, strictly increasing rows
    counts: np.ndarray = field(default=None)  # total training occurrences per column

    def __post_init__(self):
        keys = np.asarray(self.keys, dtype=np.int64).reshape(-1, 3)
        if keys.shape[0] > 1:
            order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
            if not np.array_equal(order, np.arange(keys.shape[0])) or _has_duplicates(keys):
                raise StructuralError("vocabulary keys must be strictly increasing")
        counts = self.counts
        counts = (
            np.zeros(keys.shape[0], dtype=np.int64)
            if counts is None
            else np.asarray(counts, dtype=np.int64)
        )
        if counts.shape != (keys.shape[0],):
            raise StructuralError("one count per vocabulary column required")
        keys.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "counts", counts)
        # (config_id, signal_id) -> (start, stop) of its contiguous column block
        blocks: dict[tuple[int, int], tuple[int, int]] = {}
        if keys.shape[0]:
            pair = keys[:, 0] * (1 << 32) + keys[:, 1]
            starts = np.flatnonzero(np.r_[True, pair[1:] != pair[:-1]])
            stops = np.r_[starts[1:], keys.shape[0]]
            for a, b in zip(starts.tolist(), stops.tolist()):
                blocks[(int(keys[a, 0]), int(keys[a, 1]))] = (a, b)
        object.__setattr__(self, "_blocks", blocks)

    @property
    def h(self) -> int:
        return int(self.keys.shape[0])

    def __len__(self) -> int:
        return self.h

    def config_range(self, config_id: int) -> tuple[int, int]:
        """Half-open column range of one configuration (empty if it has no words)."""
        col = self.keys[:, 0]
        lo, hi = np.searchsorted(col, [config_id, config_id + 1])
        return int(lo), int(hi)

    def block(self, config_id: int, signal_id: int) -> tuple[int, int]:
        return self._blocks.get((config_id, signal_id), (0, 0))

    def lookup(self, config_id: int, signal_id: int, codes: np.ndarray) -> np.ndarray:
        """Columns for `codes`, -1 where the word is unknown."""
        lo, hi = self.block(config_id, signal_id)
        codes = np.asarray(codes, dtype=np.int64)
        out = np.full(codes.shape, -1, dtype=np.int64)
        if hi == lo:
            return out
        known = self.keys[lo:hi, 2]
        pos = np.searchsorted(known, codes)
        pos_c = np.minimum(pos, hi - lo - 1)
        hit = known[pos_c] == codes
        out[hit] = lo + pos_c[hit]
        return out

    def index(self, key: tuple[int, int, int]) -> int:
        col = self.lookup(key[0], key[1], np.array([key[2]]))[0]
        if col < 0:
            raise KeyError(key)
        return int(col)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return np.array_equal(self.keys, other.keys) and np.array_equal(self.counts, other.counts)

    __hash__ = None  # type: ignore[assignment]


def _has_duplicates(keys: np.ndarray) -> bool:
    return bool(np.any(np.all(keys[1:] == keys[:-1], axis=1)))
