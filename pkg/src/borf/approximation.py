"""Thresholded normalization and NaN-tolerant 1D-SAX discretization.

Every reduction in this module (and in the compiled and numpy kernels) is a
plain left-to-right sum over the valid observations. Keeping one summation
order everywhere is what makes the symbolic output bit-identical across
backends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .windowing import ConfigurationError, ReceptiveField

SLOPE_SCALE = 0.03

# a segment entry: (mean_symbol, slope_symbol), or None for the NaN symbol
Entry = Optional[tuple[int, int]]


def complete_case_stats(values: Sequence[float]) -> tuple[float, float, int]:
    """Population mean and standard deviation over the non-NaN values.

    Returns ``(nan, nan, 0)`` when nothing is valid.
    """
    total = 0.0
    count = 0
    for x in values:
        if x == x:
            total += x
            count += 1
    if count == 0:
        return math.nan, math.nan, 0
    mean = total / count
    sq = 0.0
    for x in values:
        if x == x:
            sq += (x - mean) * (x - mean)
    return mean, math.sqrt(sq / count), count


@dataclass(frozen=True)
class NormalizationParams:
    beta: float
    sigma_x: float

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigurationError(f"std threshold must lie in [0, 1], got {self.beta}")

    @classmethod
    def for_signal(cls, signal, beta: float) -> "NormalizationParams":
        return cls(beta, complete_case_stats(np.asarray(signal, dtype=np.float64).tolist())[1])


def normalize(field, params: NormalizationParams):
    """Standardize one receptive field, flattening (near-)constant ones to zero.

    Accepts a :class:`ReceptiveField` or a plain sequence and returns the same
    kind. Missing positions stay missing; an all-missing field is returned as is.
    """
    raw = field.values if isinstance(field, ReceptiveField) else field
    values = np.asarray(raw, dtype=np.float64).tolist()
    mean, std, count = complete_case_stats(values)
    if count == 0:
        out = values
    else:
        sx = params.sigma_x
        keep = sx > 0.0 and std > 0.0 and std / sx >= params.beta
        if keep:
            out = [(x - mean) / std if x == x else x for x in values]
        else:
            out = [0.0 if x == x else x for x in values]
    arr = np.array(out, dtype=np.float64)
    if isinstance(field, ReceptiveField):
        return ReceptiveField(arr, field.start, field.dilation)
    return arr


def segment_edges(w: int, l: int) -> list[int]:
    """0-based segment boundaries ``floor(k*w/l)`` for ``k = 0..l``."""
    if not 1 <= l <= w:
        raise ConfigurationError(f"word length {l} must be in [1, {w}]")
    return [k * w // l for k in range(l + 1)]


@dataclass(frozen=True)
class SegmentSummary:
    mean: float
    slope: float
    valid_count: int


def pla_segment(values: Sequence[float], timesteps: Sequence[float]) -> SegmentSummary:
    """Complete-case mean and least-squares slope of one segment."""
    if len(values) != len(timesteps) or len(values) == 0:
        raise ValueError("values and timesteps must have the same nonzero length")
    vs: list[float] = []
    ts: list[float] = []
    for v, t in zip(values, timesteps):
        if v == v:
            vs.append(float(v))
            ts.append(float(t))
    return _pla(vs, ts)


def _pla(vs: list[float], ts: list[float]) -> SegmentSummary:
    count = len(vs)
    if count == 0:
        return SegmentSummary(math.nan, math.nan, 0)
    sv = 0.0
    st = 0.0
    for v, t in zip(vs, ts):
        sv += v
        st += t
    mean = sv / count
    if count == 1:
        return SegmentSummary(mean, 0.0, 1)
    tm = st / count
    num = 0.0
    den = 0.0
    for v, t in zip(vs, ts):
        dt = t - tm
        num += dt * (v - mean)
        den += dt * dt
    if den == 0.0:
        from .types import StructuralError

        raise StructuralError("segment timesteps are all identical")
    return SegmentSummary(mean, num / den, count)


# Rational approximation of the inverse normal CDF (P. J. Acklam), refined
# below with one Halley step against erfc.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def inverse_normal_cdf(p: float) -> float:
    """Quantile function of the standard normal distribution."""
    if not 0.0 < p < 1.0:
        if p == 0.0:
            return -math.inf
        if p == 1.0:
            return math.inf
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        )
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
    return x - u / (1.0 + x * u / 2.0)


def gaussian_breakpoints(alpha: int, sigma: float = 1.0) -> list[float]:
    """The ``k/alpha`` quantiles (k = 1..alpha-1) of N(0, sigma**2).

    The lower half is computed and mirrored, so the result is exactly symmetric
    about zero.
    """
    if alpha < 1:
        raise ConfigurationError(f"alphabet size must be >= 1, got {alpha}")
    if not sigma > 0:
        raise ConfigurationError(f"sigma must be > 0, got {sigma}")
    out = [0.0] * (alpha - 1)
    for k in range(1, alpha):
        lower = min(k, alpha - k)
        if 2 * lower == alpha:
            val = 0.0
        else:
            val = inverse_normal_cdf(lower / alpha) * sigma
        out[k - 1] = val if k == lower else -val
    return out


def quantize(value: float, breakpoints: Sequence[float]) -> Optional[int]:
    """Number of breakpoints ``<= value``; ``None`` (the NaN symbol) for missing."""
    if value != value:
        return None
    sym = 0
    for b in breakpoints:
        if b <= value:
            sym += 1
        else:
            break
    return sym


def slope_sigma(w: int, d: int) -> float:
    """Standard deviation of the slope distribution; 0.03/(w*d) is its variance."""
    return math.sqrt(SLOPE_SCALE / (w * d))


@dataclass(frozen=True)
class AlphabetSpec:
    alpha_mean: int
    alpha_slope: int
    mean_breakpoints: tuple[float, ...]
    slope_breakpoints: tuple[float, ...]

    @classmethod
    def build(cls, alpha_mean: int, alpha_slope: int, w: int, d: int) -> "AlphabetSpec":
        if alpha_mean < 2 or alpha_slope < 1:
            raise ConfigurationError("need alpha_mean >= 2 and alpha_slope >= 1")
        return cls(
            alpha_mean,
            alpha_slope,
            tuple(gaussian_breakpoints(alpha_mean, 1.0)),
            tuple(gaussian_breakpoints(alpha_slope, slope_sigma(w, d))),
        )

    @property
    def size(self) -> int:
        """Number of distinct segment entries, NaN symbol included."""
        return self.alpha_mean * self.alpha_slope + 1

    @property
    def nan_entry(self) -> int:
        return self.alpha_mean * self.alpha_slope

    def entry_code(self, entry: Entry) -> int:
        if entry is None:
            return self.nan_entry
        return entry[0] * self.alpha_slope + entry[1]

    def entry_from_code(self, code: int) -> Entry:
        if code == self.nan_entry:
            return None
        return divmod(code, self.alpha_slope)


@dataclass(frozen=True)
class SymbolicWord:
    config_id: int
    signal_id: int
    symbols: tuple[Entry, ...]

    def code(self, alphabet: AlphabetSpec) -> int:
        return encode_entries([alphabet.entry_code(e) for e in self.symbols], alphabet.size)

    @classmethod
    def from_code(
        cls, config_id: int, signal_id: int, code: int, l: int, alphabet: AlphabetSpec
    ) -> "SymbolicWord":
        entries = decode_entries(code, l, alphabet.size)
        return cls(config_id, signal_id, tuple(alphabet.entry_from_code(e) for e in entries))


def encode_entries(entries: Sequence[int], base: int) -> int:
    code = 0
    for e in entries:
        code = code * base + e
    return code


def decode_entries(code: int, l: int, base: int) -> list[int]:
    out = [0] * l
    for i in range(l - 1, -1, -1):
        code, out[i] = divmod(code, base)
    if code:
        raise ValueError("word code out of range for its word length")
    return out


def approximate(
    field,
    l: int,
    alphabet: AlphabetSpec,
    config_id: int = 0,
    signal_id: int = 0,
    dilation: int | None = None,
) -> SymbolicWord:
    """Discretize a normalized receptive field into a :class:`SymbolicWord`.

    Slopes are regressed on the field's own dilated time axis ``d*p`` (``p``
    the position inside the field); the slope is shift invariant, so this is
    equivalent to using absolute timesteps and keeps the word independent of
    where the field sits in the signal.
    """
    if isinstance(field, ReceptiveField):
        d = field.dilation if dilation is None else dilation
        values = np.asarray(field.values, dtype=np.float64).tolist()
    else:
        d = 1 if dilation is None else dilation
        values = np.asarray(field, dtype=np.float64).tolist()
    edges = segment_edges(len(values), l)
    symbols: list[Entry] = []
    for a, b in zip(edges[:-1], edges[1:]):
        vs = [values[p] for p in range(a, b) if values[p] == values[p]]
        ts = [float(d * p) for p in range(a, b) if values[p] == values[p]]
        seg = _pla(vs, ts)
        if seg.valid_count == 0:
            symbols.append(None)
            continue
        symbols.append(
            (quantize(seg.mean, alphabet.mean_breakpoints), quantize(seg.slope, alphabet.slope_breakpoints))
        )
    return SymbolicWord(config_id, signal_id, tuple(symbols))
