"""Multi-configuration BORF fit/transform over ragged, multivariate panels."""

from __future__ import annotations

import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .approximation import AlphabetSpec, Entry, SymbolicWord
from .types import SparseBag, TimeSeries, TimeSeriesDataset, Vocabulary, _finalize_arrays
from .windowing import ConfigurationError, WindowConfig, receptive_field_count

logger = logging.getLogger(__name__)

TASK_DEFAULTS: dict[str, dict[str, float]] = {
    "tsc": {"alpha_mean": 2, "alpha_slope": 3, "beta": 0.15},
    "tser": {"alpha_mean": 3, "alpha_slope": 1, "beta": 0.05},
}
DEFAULT_WORD_LENGTHS = (1, 2, 4, 8)
MAX_VOCABULARY = 1 << 26
WORKERS_ENV = "BORF_NUM_WORKERS"


class NotFittedError(RuntimeError):
    pass


class VocabularyOverflowError(RuntimeError):
    pass


@dataclass(frozen=True)
class BorfConfig:
    config_id: int
    w: int
    d: int = 1
    s: int = 1
    l: int = 1
    alpha_mean: int = 2
    alpha_slope: int = 1
    beta: float = 0.0

    def __post_init__(self):
        WindowConfig(self.w, self.d, self.s)
        if not 1 <= self.l <= self.w:
            raise ConfigurationError(f"word length {self.l} must be in [1, w={self.w}]")
        if self.alpha_mean < 2 or self.alpha_slope < 1:
            raise ConfigurationError("need alpha_mean >= 2 and alpha_slope >= 1")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigurationError(f"std threshold must lie in [0, 1], got {self.beta}")
        if (self.alpha_mean * self.alpha_slope + 1) ** self.l >= 1 << 63:
            raise ConfigurationError("word space too large for 64-bit word codes")

    @property
    def span(self) -> int:
        return self.d * (self.w - 1) + 1

    @cached_property
    def alphabet(self) -> AlphabetSpec:
        return AlphabetSpec.build(self.alpha_mean, self.alpha_slope, self.w, self.d)

    @cached_property
    def _bp_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.asarray(self.alphabet.mean_breakpoints, dtype=np.float64),
            np.asarray(self.alphabet.slope_breakpoints, dtype=np.float64),
        )

    def encode(self, signal: np.ndarray, sigma_x: float) -> np.ndarray:
        """Word code of every receptive field of `signal`, in start order."""
        mean_bp, slope_bp = self._bp_arrays
        return kernels.encode_signal(
            np.ascontiguousarray(signal, dtype=np.float64),
            float(sigma_x),
            self.w,
            self.d,
            self.s,
            self.l,
            float(self.beta),
            mean_bp,
            slope_bp,
            self.alpha_slope,
        )

    def as_dict(self) -> dict:
        return {
            "config_id": self.config_id,
            "w": self.w,
            "d": self.d,
            "s": self.s,
            "l": self.l,
            "alpha_mean": self.alpha_mean,
            "alpha_slope": self.alpha_slope,
            "beta": self.beta,
        }


def resolve_defaults(task: str | Mapping[str, float]) -> dict[str, float]:
    if isinstance(task, str):
        try:
            return dict(TASK_DEFAULTS[task.lower()])
        except KeyError:
            raise ConfigurationError(f"unknown task {task!r}; expected 'tsc' or 'tser'") from None
    return {k: task[k] for k in ("alpha_mean", "alpha_slope", "beta")}


def _floor_log2(x: int) -> int:
    return int(x).bit_length() - 1


def heuristic_dilations(m: int) -> list[int]:
    # largest e with 2**(2**e) <= m, i.e. floor(log2(log2(m))) in exact integer arithmetic
    e = 0
    while 2 ** (2 ** (e + 1)) <= m:
        e += 1
    return [2**i for i in range(e + 1)]


def config_grid(
    m_max: int,
    task_defaults: str | Mapping[str, float] = "tsc",
    window_sizes: Sequence[int] | None = None,
    dilations: Sequence[int] | None = None,
    word_lengths: Sequence[int] | None = None,
    stride: int = 1,
) -> list[BorfConfig]:
    """Build the multi-resolution configuration list.

    By default window sizes are ``4, 8, ..., 2**floor(log2 m)``, dilations
    ``1, 2, ..., 2**floor(log2 log2 m)`` and word lengths ``1, 2, 4, 8``; any
    of them can be overridden. Combinations with ``l > w`` or a span longer
    than `m_max` are dropped. Config ids follow sorted ``(w, d, l)`` order.
    """
    defaults = resolve_defaults(task_defaults)
    if window_sizes is None or dilations is None:
        if m_max < 4:
            raise ConfigurationError(f"longest signal has length {m_max}; need at least 4")
    W = sorted(set(window_sizes)) if window_sizes is not None else [
        2**e for e in range(2, _floor_log2(m_max) + 1)
    ]
    D = sorted(set(dilations)) if dilations is not None else heuristic_dilations(m_max)
    L = sorted(set(word_lengths)) if word_lengths is not None else list(DEFAULT_WORD_LENGTHS)
    combos = [
        (w, d, l)
        for w in W
        for d in D
        for l in L
        if l <= w and d * (w - 1) + 1 <= m_max
    ]
    if not combos:
        raise ConfigurationError(f"no valid configuration for signals of length {m_max}")
    return [
        BorfConfig(
            cid,
            w,
            d,
            stride,
            l,
            int(defaults["alpha_mean"]),
            int(defaults["alpha_slope"]),
            float(defaults["beta"]),
        )
        for cid, (w, d, l) in enumerate(combos)
    ]


def word_key(config_id: int, signal_id: int, symbols: Iterable[Entry]) -> str:
    tokens = ["NA" if e is None else f"{e[0]}.{e[1]}" for e in symbols]
    return f"c{config_id}:s{signal_id}:" + "-".join(tokens)


_KEY_RE = re.compile(r"^c(\d+):s(\d+):((?:NA|\d+\.\d+)(?:-(?:NA|\d+\.\d+))*)$")


def parse_word_key(key: str) -> tuple[int, int, tuple[Entry, ...]]:
    match = _KEY_RE.match(key)
    if match is None:
        raise ValueError(f"malformed word key {key!r}")
    symbols: list[Entry] = []
    for tok in match.group(3).split("-"):
        if tok == "NA":
            symbols.append(None)
        else:
            a, b = tok.split(".")
            symbols.append((int(a), int(b)))
    return int(match.group(1)), int(match.group(2)), tuple(symbols)


def signal_sigma(signal: np.ndarray) -> float:
    """Complete-case population standard deviation, summed left to right."""
    x = np.asarray(signal, dtype=np.float64)
    ok = ~np.isnan(x)
    cnt = int(ok.sum())
    if cnt == 0:
        return float("nan")
    mean = np.add.accumulate(np.where(ok, x, 0.0))[-1] / cnt
    diff = np.where(ok, x - mean, 0.0)
    return float(np.sqrt(np.add.accumulate(diff * diff)[-1] / cnt))


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        if env:
            workers = int(env)
        else:
            try:
                workers = len(os.sched_getaffinity(0))
            except AttributeError:
                workers = os.cpu_count() or 1
    return max(1, int(workers))


@dataclass(frozen=True)
class BorfModel:
    configs: tuple[BorfConfig, ...]
    vocabulary: Vocabulary | None = None
    task_defaults: dict = field(default_factory=dict)
    sigma_policy: str = "per-signal-complete-case-population"

    def __post_init__(self):
        object.__setattr__(self, "configs", tuple(self.configs))
        ids = [c.config_id for c in self.configs]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("config ids must be unique")
        object.__setattr__(self, "_by_id", {c.config_id: c for c in self.configs})

    @property
    def fitted(self) -> bool:
        return self.vocabulary is not None

    @property
    def h(self) -> int:
        self._check_fitted()
        return self.vocabulary.h

    def _check_fitted(self):
        if self.vocabulary is None:
            raise NotFittedError("model is not fitted")

    def config(self, config_id: int) -> BorfConfig:
        return self._by_id[config_id]

    def word(self, column: int) -> SymbolicWord:
        self._check_fitted()
        cid, sid, code = (int(v) for v in self.vocabulary.keys[column])
        cfg = self.config(cid)
        return SymbolicWord.from_code(cid, sid, code, cfg.l, cfg.alphabet)

    def word_key(self, column: int) -> str:
        w = self.word(column)
        return word_key(w.config_id, w.signal_id, w.symbols)

    def word_keys(self) -> list[str]:
        return [self.word_key(c) for c in range(self.h)]

    def column_of(self, key: str) -> int:
        self._check_fitted()
        cid, sid, symbols = parse_word_key(key)
        cfg = self.config(cid)
        code = SymbolicWord(cid, sid, symbols).code(cfg.alphabet)
        return self.vocabulary.index((cid, sid, code))

    def transform(self, dataset: TimeSeriesDataset, workers: int | None = None) -> SparseBag:
        return transform(self, dataset, workers=workers)


def _sigmas(dataset: TimeSeriesDataset) -> list[list[float]]:
    return [[signal_sigma(sig) for sig in ts.signals] for ts in dataset.series]


def _encode_item(ts: TimeSeries, sigmas: list[float], cfg: BorfConfig):
    """Distinct codes and counts for one (series, config) work item."""
    sids, codes, counts = [], [], []
    for sid, (sig, sx) in enumerate(zip(ts.signals, sigmas)):
        if sig.shape[0] < cfg.span:
            logger.debug("signal %d (m=%d) shorter than span %d", sid, sig.shape[0], cfg.span)
            continue
        u, c = np.unique(cfg.encode(sig, sx), return_counts=True)
        sids.append(np.full(u.size, sid, dtype=np.int64))
        codes.append(u)
        counts.append(c.astype(np.int64))
    if not codes:
        z = np.zeros(0, dtype=np.int64)
        return z, z, z
    return np.concatenate(sids), np.concatenate(codes), np.concatenate(counts)


def _run_items(dataset: TimeSeriesDataset, configs: Sequence[BorfConfig], workers: int | None):
    sigmas = _sigmas(dataset)
    items = [(i, cfg) for i in range(dataset.n) for cfg in configs]

    def job(item):
        i, cfg = item
        return _encode_item(dataset.series[i], sigmas[i], cfg)

    n_workers = resolve_workers(workers)
    if n_workers == 1 or len(items) <= 1:
        results = [job(it) for it in items]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(job, items))
    return items, results


def fit(
    dataset: TimeSeriesDataset,
    configs: Sequence[BorfConfig],
    workers: int | None = None,
    task_defaults: Mapping | None = None,
    max_vocabulary: int = MAX_VOCABULARY,
) -> tuple[BorfModel, SparseBag]:
    """Learn the vocabulary on `dataset` and return it with the training bag."""
    if dataset.n == 0:
        raise ValueError("cannot fit on an empty dataset")
    configs = tuple(configs)
    items, results = _run_items(dataset, configs, workers)
    rows, keys, counts = [], [], []
    for (i, cfg), (sids, codes, cnts) in zip(items, results):
        rows.append(np.full(codes.size, i, dtype=np.int64))
        keys.append(np.column_stack([np.full(codes.size, cfg.config_id, dtype=np.int64), sids, codes]))
        counts.append(cnts)
    rows_a = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    keys_a = np.concatenate(keys) if keys else np.zeros((0, 3), dtype=np.int64)
    counts_a = np.concatenate(counts) if counts else np.zeros(0, dtype=np.int64)

    if keys_a.shape[0]:
        uniq, cols = np.unique(keys_a, axis=0, return_inverse=True)
        cols = cols.reshape(-1)
    else:
        uniq, cols = keys_a, np.zeros(0, dtype=np.int64)
    if uniq.shape[0] > max_vocabulary:
        raise VocabularyOverflowError(
            f"vocabulary has {uniq.shape[0]} words, above the limit of {max_vocabulary}"
        )
    totals = np.bincount(cols, weights=counts_a, minlength=uniq.shape[0]).astype(np.int64)
    vocab = Vocabulary(uniq, totals)
    model = BorfModel(
        configs, vocab, dict(task_defaults) if task_defaults is not None else {}
    )
    bag = _finalize_arrays(rows_a, cols, counts_a, (dataset.n, vocab.h))
    return model, bag


def transform(
    model: BorfModel, dataset: TimeSeriesDataset, workers: int | None = None
) -> SparseBag:
    """Count known words only; words unseen at fit time are dropped."""
    model._check_fitted()
    vocab = model.vocabulary
    items, results = _run_items(dataset, model.configs, workers)
    rows, cols, counts = [], [], []
    for (i, cfg), (sids, codes, cnts) in zip(items, results):
        col = np.full(codes.size, -1, dtype=np.int64)
        for sid in np.unique(sids).tolist():
            sel = sids == sid
            col[sel] = vocab.lookup(cfg.config_id, sid, codes[sel])
        known = col >= 0
        rows.append(np.full(int(known.sum()), i, dtype=np.int64))
        cols.append(col[known])
        counts.append(cnts[known])
    cat = lambda xs: np.concatenate(xs) if xs else np.zeros(0, dtype=np.int64)  # noqa: E731
    return _finalize_arrays(cat(rows), cat(cols), cat(counts), (dataset.n, vocab.h))


def expected_row_mass(ts: TimeSeries, cfg: BorfConfig) -> int:
    return sum(receptive_field_count(m, cfg.w, cfg.d, cfg.s) for m in ts.lengths)
