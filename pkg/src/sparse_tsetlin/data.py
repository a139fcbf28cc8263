"""Compressed sparse binary input space.

Samples are stored as sorted arrays of active feature indices (one CSR-style
row per sample); negated features are never materialized.  A feature index
present in a row means the literal is 1, absence means its negation holds
implicitly.  This module covers tokenization, vocabulary construction,
vectorization, the sparse interchange file format, and the dense expansion
used only by the reference oracle and tests.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Sequence

import numpy as np

from .errors import DataFormatError

INDEX_DTYPE = np.int32

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_TOKEN_RE_CASED = re.compile(r"[A-Za-z0-9]+")


def tokenize(text: str, lowercase: bool = True) -> list[str]:
    """Split raw text into alphanumeric tokens (no stemming, no stop-word removal)."""
    if lowercase:
        return _TOKEN_RE.findall(text.lower())
    return _TOKEN_RE_CASED.findall(text)


def ngrams(tokens: Sequence[str], n: int) -> list[str]:
    """Join consecutive tokens into space-separated n-grams (n=1 returns a copy)."""
    if n <= 1:
        return list(tokens)
    return [" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


class Vocabulary:
    """Bijective token -> feature-index mapping with dense indices in [0, size).

    Indices are assigned in descending document frequency, ties broken by
    first occurrence in the corpus, so a rebuild over the same corpus is
    deterministic.  The construction policy (max_size, min_df) is kept for
    provenance.
    """

    def __init__(self, tokens_in_order: Sequence[str], max_size: int, min_df: int):
        self.token_to_index: dict[str, int] = {tok: i for i, tok in enumerate(tokens_in_order)}
        self.index_to_token: list[str] = list(tokens_in_order)
        self.max_size = max_size
        self.min_df = min_df
        if len(self.token_to_index) != len(self.index_to_token):
            raise DataFormatError("vocabulary tokens must be unique")

    def __len__(self) -> int:
        return len(self.index_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_index

    def __getitem__(self, token: str) -> int:
        return self.token_to_index[token]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return (
            self.index_to_token == other.index_to_token
            and self.max_size == other.max_size
            and self.min_df == other.min_df
        )


def build_vocabulary(corpus: Iterable[Sequence[str]], max_size: int, min_df: int = 1) -> Vocabulary:
    """Build a vocabulary of the max_size most-frequent tokens meeting min_df.

    Frequency is document frequency (number of documents containing the
    token), matching the binary bag-of-words representation where repeats
    within one document carry no extra signal.  Ties are broken by first
    occurrence, both for the min_df cut and for index assignment.
    """
    if max_size < 1:
        raise ValueError(f"max_size must be >= 1, got {max_size}")
    doc_freq: dict[str, int] = {}
    total_tokens = 0
    for doc in corpus:
        total_tokens += len(doc)
        for tok in dict.fromkeys(doc):  # dedup, preserving first-appearance order
            doc_freq[tok] = doc_freq.get(tok, 0) + 1
    if total_tokens == 0:
        raise DataFormatError("no tokens")
    # Stable sort on -df keeps first-occurrence order among ties.
    kept = [tok for tok, df in doc_freq.items() if df >= min_df]
    kept.sort(key=lambda tok: -doc_freq[tok])
    return Vocabulary(kept[:max_size], max_size=max_size, min_df=min_df)


def vectorize(tokens: Sequence[str], vocab: Vocabulary) -> np.ndarray:
    """Map tokens to a sorted, deduplicated index row; out-of-vocabulary tokens drop."""
    lookup = vocab.token_to_index
    seen = {lookup[tok] for tok in tokens if tok in lookup}
    return np.array(sorted(seen), dtype=INDEX_DTYPE)


def densify(row: np.ndarray, feature_count: int) -> np.ndarray:
    """Expand a sparse row into the 2o-literal bit vector [x, not-x].

    Position k (k < o) is 1 iff k is in the row; position o+k is its
    complement.  Used only by the dense oracle and by tests.
    """
    row = np.asarray(row)
    if row.size and (row.min() < 0 or row.max() >= feature_count):
        raise DataFormatError(
            f"feature index out of range [0, {feature_count}): {row.min()}..{row.max()}"
        )
    dense = np.zeros(2 * feature_count, dtype=np.uint8)
    dense[row] = 1
    dense[feature_count:] = 1 - dense[:feature_count]
    return dense


def _validate_row(indices: np.ndarray, feature_count: int, where: str) -> np.ndarray:
    indices = np.asarray(indices, dtype=INDEX_DTYPE)
    if indices.ndim != 1:
        raise DataFormatError(f"{where}: row must be one-dimensional")
    if indices.size:
        if indices[0] < 0 or indices[-1] >= feature_count:
            raise DataFormatError(
                f"{where}: feature index out of range [0, {feature_count})"
            )
        if np.any(np.diff(indices) <= 0):
            raise DataFormatError(f"{where}: indices must be strictly increasing")
    return indices


class SparseDataset:
    """Immutable labeled collection of sparse rows.

    rows[i] is a strictly increasing int32 array of active feature indices
    (< feature_count); labels[i] is a class index (< class_count).
    """

    def __init__(
        self,
        rows: Sequence[np.ndarray],
        labels: Sequence[int],
        feature_count: int,
        class_count: int,
    ):
        if len(rows) != len(labels):
            raise DataFormatError(
                f"rows ({len(rows)}) and labels ({len(labels)}) must have equal length"
            )
        if feature_count < 1:
            raise DataFormatError(f"feature_count must be >= 1, got {feature_count}")
        if class_count < 1:
            raise DataFormatError(f"class_count must be >= 1, got {class_count}")
        self.rows = [_validate_row(r, feature_count, f"row {i}") for i, r in enumerate(rows)]
        self.labels = np.asarray(labels, dtype=INDEX_DTYPE)
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= class_count):
            raise DataFormatError(f"label out of range [0, {class_count})")
        self.feature_count = feature_count
        self.class_count = class_count

    def __len__(self) -> int:
        return len(self.rows)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparseDataset):
            return NotImplemented
        return (
            self.feature_count == other.feature_count
            and self.class_count == other.class_count
            and np.array_equal(self.labels, other.labels)
            and len(self.rows) == len(other.rows)
            and all(np.array_equal(a, b) for a, b in zip(self.rows, other.rows))
        )

    def density(self) -> float:
        """Non-zero fraction over the non-negated feature space (rows x o)."""
        if not self.rows:
            raise DataFormatError("density of an empty dataset is undefined")
        total = sum(r.size for r in self.rows)
        return total / (len(self.rows) * self.feature_count)

    def subset(self, indices: Sequence[int]) -> "SparseDataset":
        """New dataset holding the selected samples (shared row arrays)."""
        ds = SparseDataset.__new__(SparseDataset)
        ds.rows = [self.rows[i] for i in indices]
        ds.labels = self.labels[np.asarray(indices, dtype=np.int64)]
        ds.feature_count = self.feature_count
        ds.class_count = self.class_count
        return ds


def density(ds: SparseDataset) -> float:
    return ds.density()


# Sparse interchange file format (UTF-8 text, one sample per line):
#   #o=<features> m=<classes>
#   <label> <idx>:1 <idx>:1 ...
# Indices ascending, unique, all < o.  Loaders are strict; builders forgiving.

_HEADER_RE = re.compile(r"^#o=(\d+) m=(\d+)$")


def save_sparse_file(ds: SparseDataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#o={ds.feature_count} m={ds.class_count}\n")
        for row, label in zip(ds.rows, ds.labels):
            if row.size:
                feats = " ".join(f"{int(i)}:1" for i in row)
                fh.write(f"{int(label)} {feats}\n")
            else:
                fh.write(f"{int(label)}\n")


def load_sparse_file(path) -> SparseDataset:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        match = _HEADER_RE.match(header)
        if not match:
            raise DataFormatError(f"{path}:1: missing or malformed header '#o=<n> m=<n>'")
        feature_count, class_count = int(match.group(1)), int(match.group(2))
        rows: list[np.ndarray] = []
        labels: list[int] = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            try:
                label = int(parts[0])
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: malformed label {parts[0]!r}") from None
            if not 0 <= label < class_count:
                raise DataFormatError(
                    f"{path}:{lineno}: label {label} out of range [0, {class_count})"
                )
            indices = []
            prev = -1
            for item in parts[1:]:
                idx_str, sep, val = item.partition(":")
                if not sep or val != "1":
                    raise DataFormatError(f"{path}:{lineno}: malformed entry {item!r}")
                try:
                    idx = int(idx_str)
                except ValueError:
                    raise DataFormatError(f"{path}:{lineno}: malformed entry {item!r}") from None
                if not 0 <= idx < feature_count:
                    raise DataFormatError(
                        f"{path}:{lineno}: index {idx} out of range [0, {feature_count})"
                    )
                if idx <= prev:
                    raise DataFormatError(
                        f"{path}:{lineno}: indices must be strictly ascending (saw {idx} after {prev})"
                    )
                indices.append(idx)
                prev = idx
            rows.append(np.array(indices, dtype=INDEX_DTYPE))
            labels.append(label)
    return SparseDataset(rows, labels, feature_count, class_count)
