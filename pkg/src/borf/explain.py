"""Saliency maps, residual importances and word prototypes for BORF features."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from ._kernels_py import normalize_fields
from .models import LinearModel
from .transform import BorfModel, signal_sigma
from .types import TimeSeries, TimeSeriesDataset
from .windowing import field_matrix, field_starts


@dataclass(frozen=True)
class Attribution:
    values: np.ndarray
    source: str = "external"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(vals)):
            raise ValueError("importances must be finite")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class SaliencyMap:
    scores: tuple[np.ndarray, ...]  # one array per signal, aligned to its timesteps
    scale: float | None
    degenerate: bool  # pre-scale mass was zero, so `scores` is all zeros

    def total(self) -> float:
        return math.fsum(float(v) for s in self.scores for v in s)


def _occurrences(model: BorfModel, ts: TimeSeries):
    """Yield ``(column, signal_id, covered 0-based indices)`` for every in-vocabulary field."""
    model._check_fitted()
    sigmas = [signal_sigma(sig) for sig in ts.signals]
    for cfg in model.configs:
        for sid, sig in enumerate(ts.signals):
            if sig.shape[0] < cfg.span:
                continue
            cols = model.vocabulary.lookup(cfg.config_id, sid, cfg.encode(sig, sigmas[sid]))
            starts = field_starts(sig.shape[0], cfg.w, cfg.d, cfg.s)
            offsets = cfg.d * np.arange(cfg.w)
            for col, start in zip(cols.tolist(), starts.tolist()):
                if col >= 0:
                    yield col, sid, start + offsets


def alignments(model: BorfModel, ts: TimeSeries) -> dict[int, Counter]:
    """Alignment multiset of every contained word.

    Maps column -> Counter of ``(signal_id, timestep)`` with 1-based timesteps.
    Words that do not occur in `ts` are absent.
    """
    out: dict[int, Counter] = {}
    for col, sid, idx in _occurrences(model, ts):
        bucket = out.setdefault(col, Counter())
        for j in idx.tolist():
            bucket[(sid, j + 1)] += 1
    return out


def saliency(model: BorfModel, ts: TimeSeries, importances) -> tuple[SaliencyMap, list[tuple[str, float]]]:
    """Map per-word importances onto the observations of `ts`.

    Each contained word spreads its importance over every timestep it covers,
    once per occurrence; the map is then rescaled so it sums to the total
    importance of the contained words. Importances of words absent from `ts`
    are returned separately as ``(word_key, importance)`` pairs.
    """
    phi = importances.values if isinstance(importances, Attribution) else np.asarray(importances, dtype=np.float64)
    if phi.shape != (model.h,):
        raise ValueError(f"expected {model.h} importances, got {phi.shape}")
    raw = [np.zeros(sig.shape[0]) for sig in ts.signals]
    contained = np.zeros(model.h, dtype=bool)
    for col, sid, idx in _occurrences(model, ts):
        contained[col] = True
        raw[sid][idx] += phi[col]
    target = math.fsum(phi[contained].tolist())
    mass = math.fsum(float(v) for r in raw for v in r)
    residual = [
        (model.word_key(c), float(phi[c])) for c in np.flatnonzero(~contained & (phi != 0)).tolist()
    ]
    if mass == 0.0:
        return SaliencyMap(tuple(np.zeros_like(r) for r in raw), None, True), residual
    scale = target / mass
    return SaliencyMap(tuple(r * scale for r in raw), scale, False), residual


@dataclass(frozen=True)
class Prototype:
    values: np.ndarray  # length w; NaN where no occurrence had a valid value
    support: int


def word_prototype(model: BorfModel, dataset: TimeSeriesDataset, word) -> Prototype:
    """Pointwise complete-case mean of the normalized training fields of `word`.

    `word` is a column index or a word key.
    """
    col = model.column_of(word) if isinstance(word, str) else int(word)
    cid, sid, code = (int(v) for v in model.vocabulary.keys[col])
    cfg = model.config(cid)
    total = np.zeros(cfg.w)
    count = np.zeros(cfg.w, dtype=np.int64)
    support = 0
    for ts in dataset.series:
        if sid >= ts.k or ts.signals[sid].shape[0] < cfg.span:
            continue
        sig = ts.signals[sid]
        sx = signal_sigma(sig)
        hit = cfg.encode(sig, sx) == code
        if not hit.any():
            continue
        fields = normalize_fields(field_matrix(sig, cfg.w, cfg.d, cfg.s)[hit], sx, cfg.beta)
        ok = ~np.isnan(fields)
        total += np.where(ok, fields, 0.0).sum(axis=0)
        count += ok.sum(axis=0)
        support += int(hit.sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(count > 0, total / count, np.nan)
    return Prototype(values, support)


def linear_attribution(model: LinearModel, features_row, target=None) -> Attribution:
    """Per-column contributions ``coef * feature`` to one linear score.

    For classification `target` names the class to explain; by default the
    predicted one.
    """
    row = features_row
    if sparse.issparse(row):
        row = np.asarray(row.todense())
    row = np.asarray(row, dtype=np.float64).reshape(-1)
    if row.size != model.h:
        raise ValueError(f"expected {model.h} features, got {row.size}")
    if model.mode == "regression":
        j = 0
    elif target is None:
        j = int(np.argmax(model.coef @ row + model.intercept))
    else:
        j = model.class_index(target)
    return Attribution(model.coef[j] * row, source="linear")
