"""Bag-Of-Receptive-Fields: symbolic, sparse features for time series prediction."""

from .approximation import (
    AlphabetSpec,
    NormalizationParams,
    SegmentSummary,
    SymbolicWord,
    approximate,
    gaussian_breakpoints,
    inverse_normal_cdf,
    normalize,
    pla_segment,
    quantize,
    segment_edges,
)
from .explain import (
    Attribution,
    Prototype,
    SaliencyMap,
    alignments,
    linear_attribution,
    saliency,
    word_prototype,
)
from .kernels import BACKEND
from .models import (
    LinearModel,
    arcsinh_map,
    fit_linear,
    metric_bacc,
    metric_mape,
    metric_r2,
    predict,
)
from .transform import (
    TASK_DEFAULTS,
    BorfConfig,
    BorfModel,
    NotFittedError,
    config_grid,
    fit,
    parse_word_key,
    transform,
    word_key,
)
from .types import (
    SparseBag,
    TimeSeries,
    TimeSeriesDataset,
    Vocabulary,
    bag_finalize,
    bag_stats,
)
from .windowing import ReceptiveField, WindowConfig, receptive_field_count, windowize

__version__ = "0.1.0"
