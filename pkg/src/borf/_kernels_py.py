"""Numpy receptive-field encoder, used when the compiled core is unavailable.

Vectorized over fields; reductions use ``np.add.accumulate`` so each field is
summed strictly left to right, matching the compiled kernel bit for bit.
"""

import numpy as np

from .windowing import field_matrix


def _seqsum(mat: np.ndarray) -> np.ndarray:
    return np.add.accumulate(mat, axis=1)[:, -1]


def normalize_fields(fields: np.ndarray, sigma_x: float, beta: float) -> np.ndarray:
    """Thresholded standardization of each row of a ``(count, w)`` field matrix."""
    if fields.shape[0] == 0:
        return fields.copy()
    with np.errstate(invalid="ignore", divide="ignore"):
        valid = ~np.isnan(fields)
        cnt = valid.sum(axis=1)
        mean = _seqsum(np.where(valid, fields, 0.0)) / cnt
        diff = np.where(valid, fields - mean[:, None], 0.0)
        std = np.sqrt(_seqsum(diff * diff) / cnt)
        keep = (sigma_x > 0.0) & (std > 0.0) & (std / sigma_x >= beta)
        scaled = np.where(keep[:, None], (fields - mean[:, None]) / std[:, None], 0.0)
    return np.where(valid, scaled, np.nan)


def encode_signal(x, sigma_x, w, d, s, l, beta, mean_bp, slope_bp, alpha_slope):
    fields = field_matrix(x, w, d, s)
    count = fields.shape[0]
    if count == 0:
        return np.empty(0, dtype=np.int64)
    mean_bp = np.asarray(mean_bp, dtype=np.float64)
    slope_bp = np.asarray(slope_bp, dtype=np.float64)
    nan_entry = (mean_bp.size + 1) * alpha_slope
    base = nan_entry + 1

    v = normalize_fields(fields, sigma_x, beta)
    with np.errstate(invalid="ignore", divide="ignore"):
        code = np.zeros(count, dtype=np.int64)
        edges = [k * w // l for k in range(l + 1)]
        for a, b in zip(edges[:-1], edges[1:]):
            seg = v[:, a:b]
            ok = ~np.isnan(seg)
            n_ok = ok.sum(axis=1)
            t = (d * np.arange(a, b)).astype(np.float64)
            seg_mean = _seqsum(np.where(ok, seg, 0.0)) / n_ok
            tm = _seqsum(np.where(ok, t[None, :], 0.0)) / n_ok
            dt = t[None, :] - tm[:, None]
            num = _seqsum(np.where(ok, dt * (seg - seg_mean[:, None]), 0.0))
            den = _seqsum(np.where(ok, dt * dt, 0.0))
            slope = np.where(n_ok >= 2, num / den, 0.0)
            msym = np.searchsorted(mean_bp, seg_mean, side="right")
            ssym = np.searchsorted(slope_bp, slope, side="right")
            entry = np.where(n_ok == 0, nan_entry, msym * alpha_slope + ssym)
            code = code * base + entry
    # rows with no valid value: every entry is already nan_entry
    return code
