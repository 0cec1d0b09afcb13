"""Strided, dilated receptive field extraction."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


class ConfigurationError(ValueError):
    """Raised for invalid hyperparameter combinations."""


@dataclass(frozen=True)
class WindowConfig:
    w: int
    d: int = 1
    s: int = 1

    def __post_init__(self):
        if self.w < 2:
            raise ConfigurationError(f"window length must be >= 2, got {self.w}")
        if self.d < 1 or self.s < 1:
            raise ConfigurationError("dilation and stride must be >= 1")

    @property
    def span(self) -> int:
        return self.d * (self.w - 1) + 1


@dataclass(frozen=True)
class ReceptiveField:
    """Values of one receptive field and the 1-based timesteps they cover."""

    values: np.ndarray
    start: int
    dilation: int

    @property
    def covered(self) -> np.ndarray:
        return self.start + self.dilation * np.arange(len(self.values))


def receptive_field_count(m: int, w: int, d: int = 1, s: int = 1) -> int:
    span = d * (w - 1) + 1
    if m < span:
        return 0
    return (m - span) // s + 1


def field_starts(m: int, w: int, d: int = 1, s: int = 1) -> np.ndarray:
    """0-based start offsets of every receptive field, ascending."""
    return np.arange(receptive_field_count(m, w, d, s), dtype=np.int64) * s


def field_matrix(signal: np.ndarray, w: int, d: int = 1, s: int = 1) -> np.ndarray:
    """All receptive fields of `signal` as rows of a ``(count, w)`` array (a copy)."""
    signal = np.asarray(signal, dtype=np.float64)
    count = receptive_field_count(signal.shape[0], w, d, s)
    if count == 0:
        return np.empty((0, w), dtype=np.float64)
    idx = field_starts(signal.shape[0], w, d, s)[:, None] + d * np.arange(w)[None, :]
    return signal[idx]


def windowize(signal, cfg: WindowConfig) -> list[ReceptiveField]:
    """Extract the receptive fields of one signal in ascending start order."""
    signal = np.asarray(signal, dtype=np.float64)
    mat = field_matrix(signal, cfg.w, cfg.d, cfg.s)
    if mat.shape[0] == 0:
        logger.debug(
            "signal of length %d shorter than span %d; no fields", signal.shape[0], cfg.span
        )
    return [
        ReceptiveField(row, int(j) + 1, cfg.d)
        for row, j in zip(mat, field_starts(signal.shape[0], cfg.w, cfg.d, cfg.s))
    ]
