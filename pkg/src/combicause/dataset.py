"""Bit-packed binary datasets, combined variables and contingency tables.

Every column is stored as a row of ``uint64`` words (bit ``r`` of the column
is bit ``r % 64`` of word ``r // 64``).  Counting a contingency table is then
a handful of word-wise ANDs followed by popcounts, which is what keeps the
millions of small tables issued by the discovery algorithms cheap.
"""

from __future__ import annotations

import csv
import json
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

WORD_BITS = 64


class DataError(ValueError):
    """Raised for malformed input data or invalid variable references."""


def pack_bits(dense: np.ndarray) -> np.ndarray:
    """Pack a ``(n_cols, n_rows)`` (or 1-d) 0/1 array into uint64 words."""
    dense = np.asarray(dense, dtype=bool)
    one_d = dense.ndim == 1
    if one_d:
        dense = dense[None, :]
    n_rows = dense.shape[1]
    n_words = max(1, -(-n_rows // WORD_BITS))
    packed = np.packbits(dense, axis=1, bitorder="little")
    padded = np.zeros((dense.shape[0], n_words * 8), dtype=np.uint8)
    padded[:, : packed.shape[1]] = packed
    words = padded.view("<u8").astype(np.uint64, copy=False)
    return words[0] if one_d else words


def unpack_bits(words: np.ndarray, n_rows: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`; returns a boolean array."""
    words = np.ascontiguousarray(words, dtype="<u8")
    one_d = words.ndim == 1
    if one_d:
        words = words[None, :]
    as_bytes = words.view(np.uint8).reshape(words.shape[0], -1)
    dense = np.unpackbits(as_bytes, axis=1, bitorder="little")[:, :n_rows]
    dense = dense.astype(bool)
    return dense[0] if one_d else dense


def popcount(words: np.ndarray) -> int:
    return int(np.bitwise_count(words).sum())


@dataclass(frozen=True, order=True)
class CombinedVariable:
    """AND-combination of one or more predictor columns.

    A single predictor is the level-1 case.  Ordering is lexicographic on
    the sorted component tuple, which is the canonical order used for all
    deterministic tie-breaking in the package.
    """

    components: tuple[int, ...]

    def __post_init__(self):
        comps = tuple(sorted(set(int(c) for c in self.components)))
        if not comps:
            raise DataError("a combined variable needs at least one component")
        object.__setattr__(self, "components", comps)

    @classmethod
    def of(cls, *components: int) -> "CombinedVariable":
        return cls(tuple(components))

    @property
    def level(self) -> int:
        return len(self.components)

    def union(self, other: "CombinedVariable") -> "CombinedVariable":
        return CombinedVariable(self.components + other.components)

    def issubset(self, other: "CombinedVariable") -> bool:
        return set(self.components) <= set(other.components)

    def label(self, names: Sequence[str]) -> str:
        return "&".join(names[c] for c in self.components)


@dataclass(frozen=True)
class BinaryDataset:
    """Immutable observational data with a designated binary target.

    Parameters
    ----------
    n_rows : int
        Number of records.
    bits : np.ndarray
        ``(n_columns, n_words)`` uint64 array, one packed column per row.
    names : tuple of str
        Column names, parallel to ``bits``.
    target_index : int
        Column holding the target ``T``; never offered as a predictor.
    """

    n_rows: int
    bits: np.ndarray
    names: tuple[str, ...]
    target_index: int
    _valid: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        bits = np.ascontiguousarray(self.bits, dtype=np.uint64)
        if bits.ndim != 2 or bits.shape[0] != len(names):
            raise DataError("bits must have one packed row per column name")
        n_words = max(1, -(-self.n_rows // WORD_BITS))
        if bits.shape[1] != n_words:
            raise DataError(f"expected {n_words} words per column, got {bits.shape[1]}")
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise DataError(f"duplicate column names: {dupes}")
        if not 0 <= self.target_index < len(names):
            raise DataError(f"target index {self.target_index} out of range")
        valid = pack_bits(np.ones(self.n_rows, dtype=bool)) if self.n_rows else np.zeros(1, np.uint64)
        if np.any(bits & ~valid):
            raise DataError("padding bits beyond n_rows must be zero")
        bits.flags.writeable = False
        valid.flags.writeable = False
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "_valid", valid)

    @classmethod
    def from_array(cls, data, names: Sequence[str], target: str | int) -> "BinaryDataset":
        """Build from a dense ``(n_rows, n_columns)`` 0/1 array."""
        arr = np.asarray(data)
        if arr.ndim != 2 or arr.shape[1] != len(names):
            raise DataError("data must be 2-d with one column per name")
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise DataError("non-binary value in data")
        target_index = target if isinstance(target, int) else _index_of(names, target)
        return cls(arr.shape[0], pack_bits(arr.T.astype(bool)), tuple(names), target_index)

    @property
    def n_columns(self) -> int:
        return len(self.names)

    @property
    def n_words(self) -> int:
        return self.bits.shape[1]

    @property
    def valid_mask(self) -> np.ndarray:
        """All-ones vector over the ``n_rows`` real bits."""
        return self._valid

    @property
    def target(self) -> np.ndarray:
        return self.bits[self.target_index]

    @property
    def target_name(self) -> str:
        return self.names[self.target_index]

    @property
    def predictors(self) -> list[int]:
        return [i for i in range(self.n_columns) if i != self.target_index]

    def column(self, index: int) -> np.ndarray:
        return self.bits[index]

    def index(self, name: str) -> int:
        return _index_of(self.names, name)

    def variable(self, *names: str) -> CombinedVariable:
        """Resolve predictor names to a :class:`CombinedVariable`."""
        cv = CombinedVariable(tuple(self.index(n) for n in names))
        check_variable(self, cv)
        return cv

    def to_dense(self) -> np.ndarray:
        """``(n_rows, n_columns)`` uint8 matrix."""
        return unpack_bits(self.bits, self.n_rows).T.astype(np.uint8)

    def label(self, cv: CombinedVariable) -> str:
        return cv.label(self.names)

    def subset(self, predictors: Sequence[str] | None = None,
               n_rows: int | None = None) -> "BinaryDataset":
        """Keep the target plus ``predictors`` (in the given order) and the first ``n_rows`` rows."""
        cols = self.predictors if predictors is None else [self.index(p) for p in predictors]
        if self.target_index in cols:
            raise DataError("the target is always kept and cannot be listed as a predictor")
        cols = [self.target_index] + list(cols)
        n = self.n_rows if n_rows is None else int(n_rows)
        if not 0 <= n <= self.n_rows:
            raise DataError(f"n_rows must lie in [0, {self.n_rows}]")
        bits = self.bits[cols]
        if n < self.n_rows:
            n_words = max(1, -(-n // WORD_BITS))
            bits = bits[:, :n_words].copy()
            tail = n - (n_words - 1) * WORD_BITS
            if n == 0:
                bits[:] = 0
            elif tail < WORD_BITS:
                bits[:, -1] &= np.uint64((1 << tail) - 1)
        return BinaryDataset(n, bits, tuple(self.names[c] for c in cols), 0)


def _index_of(names: Sequence[str], name: str) -> int:
    try:
        return list(names).index(name)
    except ValueError:
        raise DataError(f"unknown variable name {name!r}") from None


def check_variable(dataset: BinaryDataset, cv: CombinedVariable) -> None:
    for c in cv.components:
        if not 0 <= c < dataset.n_columns:
            raise DataError(f"component index {c} out of range")
        if c == dataset.target_index:
            raise DataError("the target cannot be a component of a predictor")


def materialize(dataset: BinaryDataset, cv: CombinedVariable) -> np.ndarray:
    """Packed column of ``cv``: bit r is the AND of its components' bit r."""
    check_variable(dataset, cv)
    comps = cv.components
    if len(comps) == 1:
        return dataset.bits[comps[0]]
    return np.bitwise_and.reduce(dataset.bits[list(comps)], axis=0)


class ColumnCache:
    """Thread-safe LRU cache of materialized combined variables.

    The bound is expressed in bytes so that it can be derived from a memory
    budget; single columns are never stored since they are views already.
    """

    def __init__(self, dataset: BinaryDataset, max_bytes: int = 256 * 2**20):
        self.dataset = dataset
        self.max_bytes = max_bytes
        self._entries: OrderedDict[tuple[int, ...], np.ndarray] = OrderedDict()
        self._bytes = 0
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, cv: CombinedVariable) -> np.ndarray:
        if cv.level == 1:
            check_variable(self.dataset, cv)
            return self.dataset.bits[cv.components[0]]
        key = cv.components
        with self._lock:
            vec = self._entries.get(key)
            if vec is not None:
                self._entries.move_to_end(key)
                self.hits += 1
                return vec
        vec = materialize(self.dataset, cv)
        vec.flags.writeable = False
        with self._lock:
            self.misses += 1
            if key not in self._entries:
                self._entries[key] = vec
                self._bytes += vec.nbytes
                while self._bytes > self.max_bytes and len(self._entries) > 1:
                    _, old = self._entries.popitem(last=False)
                    self._bytes -= old.nbytes
        return vec

    def __len__(self) -> int:
        return len(self._entries)


@dataclass
class ContingencyTable:
    """Counts of (x, T) per conditioning stratum.

    ``cells[s, x, t]`` holds the count of rows in stratum ``s`` with the given
    x and T values.  Stratum ``s`` encodes the conditioning assignment with
    bit ``i`` equal to the value of the i-th conditioning variable.
    """

    cells: np.ndarray
    dof: int
    n_effective: int

    @property
    def n_strata(self) -> int:
        return self.cells.shape[0]


def informative_strata(cells: np.ndarray) -> np.ndarray:
    """Boolean mask of strata where both x-margins and both T-margins are nonzero."""
    x_margin = cells.sum(axis=2)
    t_margin = cells.sum(axis=1)
    return (x_margin > 0).all(axis=1) & (t_margin > 0).all(axis=1)


def table_from_cells(cells: np.ndarray) -> ContingencyTable:
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2, 2)
    if (cells < 0).any():
        raise DataError("contingency counts must be non-negative")
    dof = int(informative_strata(cells).sum())
    return ContingencyTable(cells, dof, int(cells.sum()))


def stratum_masks(base: np.ndarray, cond_vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Row masks of the 2^|cond| conditioning strata, restricted to ``base``.

    Bit ``i`` of a stratum's index is the value taken by ``cond_vectors[i]``.
    """
    masks = base[None, :]
    for vec in cond_vectors:
        masks = np.concatenate((masks & ~vec, masks & vec))
    return masks


def count_cells(x: np.ndarray, t: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Word-wise AND/popcount kernel producing ``(n_strata, 2, 2)`` counts."""
    mx = masks & x
    stacked = np.concatenate((masks, mx, masks & t, mx & t))
    counts = np.bitwise_count(stacked).sum(axis=1, dtype=np.int64).reshape(4, -1)
    n, n_x, n_t, n_xt = counts
    cells = np.empty((masks.shape[0], 2, 2), dtype=np.int64)
    cells[:, 1, 1] = n_xt
    cells[:, 1, 0] = n_x - n_xt
    cells[:, 0, 1] = n_t - n_xt
    cells[:, 0, 0] = n - n_x - n_t + n_xt
    return cells


def cooccurrence(columns: np.ndarray, t: np.ndarray, n_rows: int,
                 chunk_words: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise counts ``|a & b|`` and ``|a & b & t|`` over packed ``columns``.

    Rows are unpacked in chunks and counted with a float32 matrix product,
    which is exact while a chunk holds fewer than 2**24 rows.
    """
    m, n_words = columns.shape
    both = np.zeros((m, m), dtype=np.int64)
    with_t = np.zeros((m, m), dtype=np.int64)
    for start in range(0, n_words, chunk_words):
        stop = min(start + chunk_words, n_words)
        rows = min(n_rows, stop * WORD_BITS) - start * WORD_BITS
        if rows <= 0:
            break
        dense = unpack_bits(columns[:, start:stop], rows).astype(np.float32)
        tt = unpack_bits(t[start:stop], rows).astype(np.float32)
        both += np.rint(dense @ dense.T).astype(np.int64)
        with_t += np.rint((dense * tt) @ dense.T).astype(np.int64)
    return both, with_t


def contingency(
    dataset: BinaryDataset,
    x: CombinedVariable,
    cond: Iterable[CombinedVariable] = (),
    row_mask: np.ndarray | None = None,
    cache: ColumnCache | None = None,
) -> ContingencyTable:
    """Stratified 2x2 counts of ``x`` against the target.

    Combined variables in ``cond`` count as single binary variables, so
    ``k`` conditioning variables always give ``2**k`` strata.
    """
    get = cache.get if cache is not None else (lambda cv: materialize(dataset, cv))
    xv = get(x)
    cond_vecs = [get(c) for c in cond]
    base = dataset.valid_mask
    if row_mask is not None:
        row_mask = np.asarray(row_mask, dtype=np.uint64)
        if row_mask.shape != base.shape:
            raise DataError("row mask must have one word per data word")
        base = base & row_mask
    cells = count_cells(xv, dataset.target, stratum_masks(base, cond_vecs))
    return ContingencyTable(cells, int(informative_strata(cells).sum()), int(cells.sum()))


# ---------------------------------------------------------------------------
# I/O


def binarize(raw_column: Sequence[str], categories: Sequence[str]) -> list[np.ndarray]:
    """One-hot indicator columns, one per category, in category order."""
    if len(set(categories)) != len(categories):
        raise DataError("categories must be unique")
    lookup = {c: i for i, c in enumerate(categories)}
    codes = np.empty(len(raw_column), dtype=np.int64)
    for r, value in enumerate(raw_column):
        try:
            codes[r] = lookup[value]
        except KeyError:
            raise DataError(f"value {value!r} at row {r} is not among the categories") from None
    return [codes == i for i in range(len(categories))]


def load_binarization(path: str | Path) -> dict[str, list[str]]:
    with open(path, encoding="utf-8") as fh:
        spec = json.load(fh)
    if not isinstance(spec, dict) or not all(isinstance(v, list) for v in spec.values()):
        raise DataError("binarization directive must map column names to category lists")
    return {str(k): [str(c) for c in v] for k, v in spec.items()}


def load_csv(
    path: str | Path,
    target_name: str,
    binarization: Mapping[str, Sequence[str]] | None = None,
) -> BinaryDataset:
    """Read a header-first CSV of 0/1 cells.

    Columns listed in ``binarization`` are expanded into one indicator
    column per category, named ``"<column>=<category>"``.  Empty cells are
    rejected; there is no imputation.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    binarization = dict(binarization or {})
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        rows = [row for row in reader if row]
    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise DataError(f"duplicate column names: {dupes}")
    unknown = set(binarization) - set(header)
    if unknown:
        raise DataError(f"binarization directive names unknown columns: {sorted(unknown)}")
    if target_name not in header:
        raise DataError(f"unknown target name {target_name!r}")
    for r, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DataError(f"line {r}: expected {len(header)} cells, got {len(row)}")

    names: list[str] = []
    columns: list[np.ndarray] = []
    target_index = -1
    for j, name in enumerate(header):
        raw = [row[j].strip() for row in rows]
        missing = [i for i, v in enumerate(raw) if v == ""]
        if missing:
            raise DataError(f"column {name!r} has a missing value at data row {missing[0] + 1}")
        if name in binarization:
            if name == target_name:
                raise DataError("the target column must already be binary")
            cats = list(binarization[name])
            for cat, col in zip(cats, binarize(raw, cats)):
                names.append(f"{name}={cat}")
                columns.append(col)
            continue
        bad = [v for v in raw if v not in ("0", "1")]
        if bad:
            raise DataError(f"non-binary value {bad[0]!r} in column {name!r}")
        if name == target_name:
            target_index = len(names)
        names.append(name)
        columns.append(np.array([v == "1" for v in raw], dtype=bool))
    if len(set(names)) != len(names):
        raise DataError("binarized indicator names collide with existing columns")
    dense = np.vstack(columns) if columns else np.zeros((0, len(rows)), dtype=bool)
    return BinaryDataset(len(rows), pack_bits(dense), tuple(names), target_index)


def write_csv(dataset: BinaryDataset, path: str | Path) -> None:
    dense = dataset.to_dense()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset.names)
        writer.writerows(dense.tolist())
