"""Datasets in the XMLC repository text format, plus TF-IDF weighting.

File layout::

    N d m
    l1,l2,... i1:v1 i2:v2 ...
    ...

The label field may be empty, in which case the line starts with whitespace
(or holds only features).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np


class DataError(ValueError):
    """Raised for malformed or out-of-range input data."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParseError(DataError):
    pass


class BoundsError(DataError):
    pass


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Sorted index/value pairs over a fixed dimension."""

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-d arrays of equal length")
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.dim:
                raise BoundsError(f"feature index out of range [0, {self.dim})")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing")
        if np.any(val == 0.0):
            raise ValueError("explicit zeros are not stored")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]], dim: int) -> "SparseVector":
        """Build from unordered pairs; duplicate indices are summed, zeros dropped."""
        acc: dict[int, float] = {}
        for i, v in pairs:
            acc[int(i)] = acc.get(int(i), 0.0) + float(v)
        keys = sorted(k for k, v in acc.items() if v != 0.0)
        return cls(np.array(keys, dtype=np.int64), np.array([acc[k] for k in keys]), dim)

    @classmethod
    def unchecked(cls, indices: np.ndarray, values: np.ndarray, dim: int) -> "SparseVector":
        """Skip validation; callers guarantee sorted in-range indices and nonzero values."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "indices", indices)
        object.__setattr__(obj, "values", values)
        object.__setattr__(obj, "dim", dim)
        return obj

    @classmethod
    def from_dense(cls, x) -> "SparseVector":
        x = np.asarray(x, dtype=np.float64)
        nz = np.flatnonzero(x)
        return cls(nz, x[nz], x.shape[0])

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def pairs(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return f"SparseVector(dim={self.dim}, {self.pairs()})"


@dataclass(frozen=True)
class Example:
    features: SparseVector
    labels: frozenset[int] = frozenset()
    weight: float = 1.0

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError("example weight must be positive")
        if not isinstance(self.labels, frozenset):
            object.__setattr__(self, "labels", frozenset(int(j) for j in self.labels))


@dataclass
class Dataset:
    examples: list[Example]
    num_features: int
    num_labels: int
    source: str = "<memory>"
    _dense: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.num_features < 1 or self.num_labels < 1:
            raise ValueError("num_features and num_labels must be positive")
        for n, ex in enumerate(self.examples):
            if ex.features.dim != self.num_features:
                raise BoundsError(f"example {n} has dimension {ex.features.dim}")
            if ex.labels and (min(ex.labels) < 0 or max(ex.labels) >= self.num_labels):
                raise BoundsError(f"example {n} has a label outside [0, {self.num_labels})")

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def __getitem__(self, i):
        if isinstance(i, slice):
            dense = self._dense[i] if self._dense is not None else None
            return Dataset(self.examples[i], self.num_features, self.num_labels, self.source, dense)
        return self.examples[i]

    def feature_matrix(self) -> np.ndarray:
        """Dense n x d matrix (cached); only sensible for small d."""
        if self._dense is None:
            X = np.zeros((len(self.examples), self.num_features))
            for r, ex in enumerate(self.examples):
                X[r, ex.features.indices] = ex.features.values
            self._dense = X
        return self._dense

    def label_matrix(self) -> np.ndarray:
        Y = np.zeros((len(self.examples), self.num_labels), dtype=bool)
        for r, ex in enumerate(self.examples):
            if ex.labels:
                Y[r, list(ex.labels)] = True
        return Y

    def label_frequencies(self) -> np.ndarray:
        freq = np.zeros(self.num_labels)
        for ex in self.examples:
            for j in ex.labels:
                freq[j] += ex.weight
        return freq

    def split(self, n_first: int) -> tuple["Dataset", "Dataset"]:
        return self[:n_first], self[n_first:]


def _parse_header(line: str) -> tuple[int, int, int]:
    parts = line.split()
    if len(parts) != 3:
        raise ParseError("header must be 'N d m'", line=1)
    try:
        n, d, m = (int(p) for p in parts)
    except ValueError:
        raise ParseError("header fields must be integers", line=1) from None
    if n < 0 or d < 1 or m < 1:
        raise ParseError("header requires N >= 0, d >= 1, m >= 1", line=1)
    return n, d, m


def parse_line(line: str, d: int, m: int, lineno: int | None = None) -> Example:
    text = line.rstrip("\n")
    tokens = text.split()
    labels: set[int] = set()
    if tokens and ":" not in tokens[0] and not text[:1].isspace():
        label_field = tokens.pop(0)
        for tok in label_field.split(","):
            if tok == "":
                continue
            try:
                j = int(tok)
            except ValueError:
                raise ParseError(f"bad label {tok!r}", line=lineno) from None
            if not 0 <= j < m:
                raise BoundsError(f"label {j} outside [0, {m})", line=lineno)
            labels.add(j)
    pairs = []
    for tok in tokens:
        idx, sep, val = tok.partition(":")
        if not sep:
            raise ParseError(f"expected index:value, got {tok!r}", line=lineno)
        try:
            i, v = int(idx), float(val)
        except ValueError:
            raise ParseError(f"bad feature {tok!r}", line=lineno) from None
        if not 0 <= i < d:
            raise BoundsError(f"feature index {i} outside [0, {d})", line=lineno)
        if not math.isfinite(v):
            raise ParseError(f"non-finite value in {tok!r}", line=lineno)
        pairs.append((i, v))
    return Example(SparseVector.from_pairs(pairs, d), frozenset(labels))


def parse_xmlc(stream: TextIO | str, source: str | None = None) -> Dataset:
    """Read a dataset in the XMLC repository format.

    Accepts an open text stream or the file contents as a string. Errors
    carry the 1-based line number of the offending line.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    header = stream.readline()
    if not header.strip():
        raise ParseError("missing header", line=1)
    n, d, m = _parse_header(header)
    examples = []
    for lineno, line in enumerate(stream, start=2):
        if not line.strip() and len(examples) >= n:
            continue
        if len(examples) >= n:
            raise ParseError(f"more than {n} examples", line=lineno)
        examples.append(parse_line(line, d, m, lineno))
    if len(examples) != n:
        raise ParseError(f"header promises {n} examples, found {len(examples)}")
    return Dataset(examples, d, m, source=source or getattr(stream, "name", "<stream>"))


def load_xmlc(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        try:
            return parse_xmlc(fh, source=str(path))
        except DataError as exc:
            err = type(exc)(f"{path}: {exc}")
            err.line = exc.line
            raise err from None


def format_example(ex: Example) -> str:
    labels = ",".join(str(j) for j in sorted(ex.labels))
    feats = " ".join(f"{i}:{v:.9g}" for i, v in ex.features.pairs())
    if not labels:
        return " " + feats
    return f"{labels} {feats}" if feats else labels


def write_xmlc(dataset: Dataset, stream: TextIO) -> None:
    stream.write(f"{len(dataset)} {dataset.num_features} {dataset.num_labels}\n")
    for ex in dataset.examples:
        stream.write(format_example(ex) + "\n")


def save_xmlc(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_xmlc(dataset, fh)


def tfidf_fit(dataset: Dataset) -> np.ndarray:
    """Smoothed inverse document frequency, ``ln((1 + N) / (1 + df)) + 1``."""
    if len(dataset) == 0:
        raise ValueError("cannot fit idf on an empty dataset")
    df = np.zeros(dataset.num_features)
    for ex in dataset.examples:
        df[ex.features.indices] += 1.0
    return np.log((1.0 + len(dataset)) / (1.0 + df)) + 1.0


def tfidf_transform(x: SparseVector, idf: np.ndarray) -> SparseVector:
    if idf.shape[0] != x.dim:
        raise ValueError(f"idf table has {idf.shape[0]} entries, vector has dim {x.dim}")
    return SparseVector(x.indices, x.values * idf[x.indices], x.dim)


def tfidf_dataset(dataset: Dataset, idf: np.ndarray) -> Dataset:
    examples = [Example(tfidf_transform(ex.features, idf), ex.labels, ex.weight) for ex in dataset]
    return Dataset(examples, dataset.num_features, dataset.num_labels, dataset.source)
