"""Readers and writers: ``.ts`` datasets, sparse bags, model and saliency documents."""

from __future__ import annotations

import io
import json
import logging
import math
import os
import re
from dataclasses import dataclass, field
from typing import IO, Any, Sequence

import numpy as np

from .approximation import SymbolicWord
from .explain import Attribution, Prototype, SaliencyMap
from .models import LinearModel
from .transform import BorfConfig, BorfModel, parse_word_key
from .types import SparseBag, StructuralError, TimeSeriesDataset, Vocabulary, bag_finalize
from .windowing import ConfigurationError

logger = logging.getLogger(__name__)

MODEL_FORMAT = "borf-model"
MODEL_VERSION = 1
SALIENCY_FORMAT = "borf-saliency"
SPARSE_FORMATS = ("coo-tsv", "svmlight")


class TsParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ModelFormatError(ValueError):
    pass


def _open_text(src, mode="r"):
    if isinstance(src, (str, os.PathLike)):
        return open(src, mode, encoding="utf-8", newline="\n"), True
    return src, False


# --------------------------------------------------------------------------
# .ts datasets

_NUMBER = re.compile(r"^[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?$")
_BOOL = {"true": True, "false": False}


@dataclass
class TsHeader:
    problem_name: str | None = None
    univariate: bool | None = None
    dimensions: int | None = None
    equal_length: bool | None = None
    series_length: int | None = None
    class_labels: list[str] | None = None  # None: no class labels; may be [] if undeclared
    target_label: bool = False
    missing: bool | None = None
    timestamps: bool = False
    extra: dict[str, str] = field(default_factory=dict)

    @property
    def task(self) -> str | None:
        if self.class_labels is not None:
            return "tsc"
        if self.target_label:
            return "tser"
        return None


def _parse_bool(value: str, key: str, lineno: int) -> bool:
    v = value.strip().lower()
    if v not in _BOOL:
        raise TsParseError(f"@{key} expects true/false, got {value!r}", lineno)
    return _BOOL[v]


def _parse_int(value: str, key: str, lineno: int) -> int:
    try:
        out = int(value.strip())
    except ValueError:
        raise TsParseError(f"@{key} expects an integer, got {value!r}", lineno) from None
    if out < 0:
        raise TsParseError(f"@{key} must be non-negative", lineno)
    return out


def _parse_header(key: str, rest: str, header: TsHeader, lineno: int) -> None:
    if key == "problemname":
        header.problem_name = rest.strip()
    elif key == "timestamps":
        header.timestamps = _parse_bool(rest, key, lineno)
        if header.timestamps:
            raise TsParseError("timestamped series are not supported", lineno)
    elif key == "missing":
        header.missing = _parse_bool(rest, key, lineno)
    elif key == "univariate":
        header.univariate = _parse_bool(rest, key, lineno)
    elif key in ("dimensions", "dimension"):
        header.dimensions = _parse_int(rest, key, lineno)
    elif key == "equallength":
        header.equal_length = _parse_bool(rest, key, lineno)
    elif key == "serieslength":
        header.series_length = _parse_int(rest, key, lineno)
    elif key == "classlabel":
        tokens = rest.split()
        if not tokens:
            raise TsParseError("@classLabel needs true/false", lineno)
        if _parse_bool(tokens[0], key, lineno):
            if header.target_label:
                raise TsParseError("@classLabel and @targetLabel are mutually exclusive", lineno)
            header.class_labels = tokens[1:]
        elif len(tokens) > 1:
            raise TsParseError("@classLabel false takes no labels", lineno)
    elif key == "targetlabel":
        if _parse_bool(rest, key, lineno):
            if header.class_labels is not None:
                raise TsParseError("@classLabel and @targetLabel are mutually exclusive", lineno)
            header.target_label = True
    else:
        raise TsParseError(f"unknown header @{key}", lineno)


def _parse_values(token: str, lineno: int) -> list[float]:
    token = token.strip()
    if not token:
        return []
    out = []
    for raw in token.split(","):
        raw = raw.strip()
        if raw == "?":
            out.append(math.nan)
        elif _NUMBER.match(raw):
            out.append(float(raw))
        else:
            raise TsParseError(f"non-numeric value {raw!r}", lineno)
    return out


def parse_ts(source) -> tuple[TimeSeriesDataset, TsHeader]:
    """Parse a ``.ts`` document from a path, text stream or string content."""
    if isinstance(source, str) and "\n" in source:
        stream, close = io.StringIO(source), False
    else:
        stream, close = _open_text(source)
    try:
        return _parse_ts_lines(stream)
    finally:
        if close:
            stream.close()


def _parse_ts_lines(lines) -> tuple[TimeSeriesDataset, TsHeader]:
    header = TsHeader()
    in_data = False
    series: list[list[list[float]]] = []
    labels: list[Any] = []
    n_dims = None
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if not in_data:
            if not line.startswith("@"):
                raise TsParseError("expected a header line before @data", lineno)
            key, _, rest = line[1:].partition(" ")
            key = key.lower()
            if key == "data":
                in_data = True
                if header.univariate and header.dimensions not in (None, 1):
                    raise TsParseError("@univariate true conflicts with @dimensions", lineno)
                n_dims = 1 if header.univariate else header.dimensions
                continue
            _parse_header(key, rest, header, lineno)
            continue
        tokens = line.split(":")
        label = None
        if header.class_labels is not None or header.target_label:
            if len(tokens) < 2:
                raise TsParseError("missing label", lineno)
            raw_label = tokens.pop().strip()
            if header.target_label:
                if not _NUMBER.match(raw_label):
                    raise TsParseError(f"non-numeric target {raw_label!r}", lineno)
                label = float(raw_label)
            else:
                if header.class_labels and raw_label not in header.class_labels:
                    raise TsParseError(f"undeclared class label {raw_label!r}", lineno)
                label = raw_label
        if n_dims is None:
            n_dims = len(tokens)
        if len(tokens) != n_dims:
            raise TsParseError(f"expected {n_dims} dimensions, found {len(tokens)}", lineno)
        signals = [_parse_values(tok, lineno) for tok in tokens]
        if header.equal_length:
            lengths = {len(s) for s in signals}
            if series:
                lengths.add(len(series[0][0]))
            if header.series_length is not None:
                lengths.add(header.series_length)
            if len(lengths) > 1:
                raise TsParseError("unequal lengths although @equalLength is true", lineno)
        if header.missing is False and any(math.isnan(v) for s in signals for v in s):
            logger.warning("line %d: missing values although @missing is false", lineno)
        series.append(signals)
        labels.append(label)
    if not in_data:
        raise TsParseError("no @data section")
    has_labels = header.class_labels is not None or header.target_label
    try:
        dataset = TimeSeriesDataset(series, labels if has_labels else None)
    except StructuralError as exc:
        raise TsParseError(str(exc)) from None
    return dataset, header


def _fmt_float(v: float) -> str:
    if math.isnan(v):
        return "?"
    return repr(float(v))


def write_ts(dataset: TimeSeriesDataset, dest, problem_name: str = "dataset", task: str | None = None) -> None:
    """Write `dataset` as ``.ts``; `task` ('tsc'/'tser') controls the label headers."""
    if task is None and dataset.labels is not None:
        task = "tser" if all(isinstance(y, (int, float)) and not isinstance(y, bool) for y in dataset.labels) else "tsc"
    lengths = {m for ts in dataset.series for m in ts.lengths}
    dims = {ts.k for ts in dataset.series}
    has_nan = any(np.isnan(s).any() for ts in dataset.series for s in ts.signals)
    lines = [f"@problemName {problem_name}", "@timeStamps false", f"@missing {str(has_nan).lower()}"]
    k = dims.pop() if len(dims) == 1 else None
    if k is None:
        raise StructuralError("all series must have the same number of signals")
    lines.append(f"@univariate {str(k == 1).lower()}")
    if k > 1:
        lines.append(f"@dimensions {k}")
    lines.append(f"@equalLength {str(len(lengths) == 1).lower()}")
    if len(lengths) == 1:
        lines.append(f"@seriesLength {lengths.pop()}")
    if task == "tsc":
        classes = sorted({str(y) for y in dataset.labels})
        lines.append("@classLabel true " + " ".join(classes))
    elif task == "tser":
        lines.append("@targetLabel true")
    else:
        lines.append("@classLabel false")
    lines.append("@data")
    for i, ts in enumerate(dataset.series):
        parts = [",".join(_fmt_float(v) for v in sig.tolist()) for sig in ts.signals]
        if task == "tsc":
            parts.append(str(dataset.labels[i]))
        elif task == "tser":
            parts.append(repr(float(dataset.labels[i])))
        lines.append(":".join(parts))
    stream, close = _open_text(dest, "w")
    try:
        stream.write("\n".join(lines) + "\n")
    finally:
        if close:
            stream.close()


# --------------------------------------------------------------------------
# sparse bags


def _fmt_label(y) -> str:
    if isinstance(y, (bool, np.bool_)):
        return str(int(y))
    if isinstance(y, (int, np.integer)):
        return str(int(y))
    if isinstance(y, (float, np.floating)):
        return "%.17g" % float(y)
    return str(y)


def write_sparse(bag: SparseBag, dest, format: str = "coo-tsv", labels: Sequence | None = None) -> None:
    if format not in SPARSE_FORMATS:
        raise ValueError(f"unknown sparse format {format!r}; expected one of {SPARSE_FORMATS}")
    out: list[str] = []
    if format == "coo-tsv":
        out.append(f"{bag.n} {bag.h} {bag.nnz}\n")
        out.extend(f"{r}\t{c}\t{v}\n" for r, c, v in bag.triplets())
    else:
        if labels is not None and len(labels) != bag.n:
            raise ValueError("one label per row required")
        bounds = np.searchsorted(bag.rows, np.arange(bag.n + 1))
        cols, vals = bag.cols.tolist(), bag.vals.tolist()
        for i in range(bag.n):
            lab = _fmt_label(labels[i]) if labels is not None else "0"
            feats = " ".join(f"{cols[t]}:{vals[t]}" for t in range(bounds[i], bounds[i + 1]))
            out.append(f"{lab} {feats}\n" if feats else f"{lab}\n")
    stream, close = _open_text(dest, "w")
    try:
        stream.write("".join(out))
    finally:
        if close:
            stream.close()


def read_sparse(src, format: str = "coo-tsv", n_features: int | None = None) -> tuple[SparseBag, list[str] | None]:
    """Read a bag written by :func:`write_sparse`.

    Returns ``(bag, labels)``; labels are the raw svmlight label tokens, or
    ``None`` for coo-tsv.
    """
    stream, close = _open_text(src)
    try:
        text = stream.read()
    finally:
        if close:
            stream.close()
    lines = text.splitlines()
    if format == "coo-tsv":
        if not lines:
            raise ValueError("empty coo-tsv document")
        try:
            n, h, nnz = (int(v) for v in lines[0].split())
            trip = [tuple(int(v) for v in ln.split("\t")) for ln in lines[1:] if ln]
        except ValueError as exc:
            raise ValueError(f"malformed coo-tsv document: {exc}") from None
        if len(trip) != nnz:
            raise ValueError(f"header declares {nnz} entries, found {len(trip)}")
        return bag_finalize(trip, (n, h)), None
    if format == "svmlight":
        labels, trip = [], []
        for i, ln in enumerate(lines):
            toks = ln.split()
            labels.append(toks[0])
            for t in toks[1:]:
                c, v = t.split(":")
                trip.append((i, int(c), int(v)))
        h = n_features if n_features is not None else max((t[1] for t in trip), default=-1) + 1
        return bag_finalize(trip, (len(lines), h)), labels
    raise ValueError(f"unknown sparse format {format!r}")


# --------------------------------------------------------------------------
# model documents


def _linear_to_doc(lin: LinearModel) -> dict:
    return {
        "mode": lin.mode,
        "lambda": lin.lam,
        "feature_map": "arcsinh",
        "classes": list(lin.classes) if lin.classes is not None else None,
        "intercept": [float(v) for v in lin.intercept],
        "coef": [[float(v) for v in row] for row in lin.coef],
    }


def model_to_doc(model: BorfModel, linear: LinearModel | None = None, task: str | None = None) -> dict:
    model._check_fitted()
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "task": task,
        "task_defaults": model.task_defaults,
        "sigma_policy": model.sigma_policy,
        "configs": [c.as_dict() for c in model.configs],
        "vocabulary": [[k, int(c)] for k, c in zip(model.word_keys(), model.vocabulary.counts.tolist())],
        "linear": _linear_to_doc(linear) if linear is not None else None,
    }


def dumps_model(model: BorfModel, linear: LinearModel | None = None, task: str | None = None) -> str:
    return json.dumps(model_to_doc(model, linear, task), indent=1, allow_nan=False) + "\n"


def save_model(model: BorfModel, dest, linear: LinearModel | None = None, task: str | None = None) -> None:
    stream, close = _open_text(dest, "w")
    try:
        stream.write(dumps_model(model, linear, task))
    finally:
        if close:
            stream.close()


@dataclass
class LoadedModel:
    borf: BorfModel
    linear: LinearModel | None
    task: str | None


def loads_model(text: str) -> LoadedModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model document is not valid JSON (truncated?): {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a BORF model document")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {doc.get('version')!r}")
    try:
        configs = [BorfConfig(**c) for c in doc["configs"]]
        model = BorfModel(configs, None, dict(doc.get("task_defaults") or {}), doc["sigma_policy"])
        keys, counts = [], []
        for pos, entry in enumerate(doc["vocabulary"]):
            keys.append(_vocab_key(model, entry, pos))
            counts.append(int(entry[1]))
        vocab = Vocabulary(np.array(keys, dtype=np.int64).reshape(-1, 3), np.array(counts, dtype=np.int64))
        model = BorfModel(configs, vocab, model.task_defaults, model.sigma_policy)
        linear = _linear_from_doc(doc["linear"], vocab.h) if doc.get("linear") is not None else None
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError, ConfigurationError, StructuralError) as exc:
        raise ModelFormatError(f"invalid model document: {exc}") from None
    return LoadedModel(model, linear, doc.get("task"))


def _vocab_key(model: BorfModel, entry, pos: int) -> tuple[int, int, int]:
    if not isinstance(entry, list) or len(entry) != 2 or not isinstance(entry[0], str):
        raise ModelFormatError(f"vocabulary entry {pos} is malformed")
    try:
        cid, sid, symbols = parse_word_key(entry[0])
        cfg = model.config(cid)
    except (ValueError, KeyError):
        raise ModelFormatError(f"vocabulary entry {pos} ({entry[0]!r}) is invalid") from None
    ok = len(symbols) == cfg.l and all(
        e is None or (0 <= e[0] < cfg.alpha_mean and 0 <= e[1] < cfg.alpha_slope) for e in symbols
    )
    if not ok or not isinstance(entry[1], int) or entry[1] < 0:
        raise ModelFormatError(f"vocabulary entry {pos} ({entry[0]!r}) is invalid")
    return cid, sid, SymbolicWord(cid, sid, symbols).code(cfg.alphabet)


def _linear_from_doc(doc: dict, h: int) -> LinearModel:
    coef = np.array(doc["coef"], dtype=np.float64)
    intercept = np.array(doc["intercept"], dtype=np.float64)
    if coef.ndim != 2 or coef.shape[1] != h or intercept.shape != (coef.shape[0],):
        raise ModelFormatError("linear model shape does not match the vocabulary")
    classes = tuple(doc["classes"]) if doc.get("classes") is not None else None
    return LinearModel(coef, intercept, float(doc["lambda"]), doc["mode"], classes)


def load_model(src) -> LoadedModel:
    stream, close = _open_text(src)
    try:
        return loads_model(stream.read())
    finally:
        if close:
            stream.close()


# --------------------------------------------------------------------------
# importances and saliency documents


def read_importances(src, model: BorfModel) -> Attribution:
    """Importances keyed by word key, as JSON (object or pair list) or ``key<TAB>value`` lines.

    Words not listed get zero importance; unknown words are an error.
    """
    stream, close = _open_text(src)
    try:
        text = stream.read()
    finally:
        if close:
            stream.close()
    stripped = text.lstrip()
    if stripped.startswith("{") or stripped.startswith("["):
        doc = json.loads(text)
        pairs = list(doc.items()) if isinstance(doc, dict) else [tuple(p) for p in doc]
    else:
        pairs = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected '<word>\\t<importance>'")
            pairs.append((parts[0].strip(), parts[1]))
    phi = np.zeros(model.h)
    for key, value in pairs:
        try:
            col = model.column_of(key)
        except (KeyError, ValueError):
            raise ValueError(f"word {key!r} is not in the model vocabulary") from None
        phi[col] = float(value)
    return Attribution(phi, source="external")


def _nan_to_none(values) -> list:
    return [None if math.isnan(v) else float(v) for v in np.asarray(values, dtype=np.float64).tolist()]


def saliency_to_doc(
    smap: SaliencyMap,
    residual: list[tuple[str, float]],
    index: int | None = None,
    source: str | None = None,
    prototypes: dict[str, Prototype] | None = None,
) -> dict:
    doc = {
        "format": SALIENCY_FORMAT,
        "version": 1,
        "index": index,
        "source": source,
        "scale": smap.scale,
        "degenerate_mass": smap.degenerate,
        "signals": [[float(v) for v in s.tolist()] for s in smap.scores],
        "residual": [{"word": k, "importance": v} for k, v in residual],
    }
    if prototypes is not None:
        doc["prototypes"] = {
            k: {"values": _nan_to_none(p.values), "support": p.support} for k, p in prototypes.items()
        }
    return doc


def write_saliency(dest, *args, **kwargs) -> None:
    text = json.dumps(saliency_to_doc(*args, **kwargs), indent=1, allow_nan=False) + "\n"
    stream, close = _open_text(dest, "w")
    try:
        stream.write(text)
    finally:
        if close:
            stream.close()
