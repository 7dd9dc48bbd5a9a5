"""
Item Memory Module

Auto-associative item memory (clean-up) and heteroassociative memory
(address -> content record). Retrieval is an exhaustive nearest-neighbour
scan by exact integer dot product; ties go to the lowest entry index.
"""

import csv
import logging
from typing import Any, Dict, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from hypervectors import (
    DEFAULT_TIEBREAK_SEED,
    Accumulator,
    CodebookFormatError,
    DimensionMismatchError,
    DuplicateAddressError,
    EmptyMemoryError,
    HDCError,
    Hypervector,
    RandomSource,
    Rng,
    UnknownSymbolError,
    VectorLike,
    count_differences,
    derive_seed,
    load_vectors,
    permute,
    random_hypervectors,
    save_vectors,
    tiebreak_vector,
)

logger = logging.getLogger(__name__)

# Rows converted to int64 at a time for accumulator scans.
_SCAN_BLOCK = 1024


class Match(NamedTuple):
    """Result of a clean-up query."""

    name: str
    vector: Hypervector
    score: int


def round_divide(values: np.ndarray, divisor: int) -> np.ndarray:
    """Integer division rounding half away from zero."""
    values = np.asarray(values, dtype=np.int64)
    if divisor == 1:
        return values.copy()
    if divisor < 1:
        raise HDCError(f"Divisor must be a positive integer, got {divisor}")
    magnitude = (np.abs(values) + divisor // 2) // divisor
    return np.sign(values) * magnitude


def _stack_packed(vectors: Sequence[Hypervector], dim: int) -> np.ndarray:
    if not vectors:
        return np.zeros((0, (dim + 7) // 8), dtype=np.uint8)
    for vector in vectors:
        if vector.dim != dim:
            raise DimensionMismatchError(f"Dimension mismatch: {dim} != {vector.dim}")
    matrix = np.stack([vector.packed for vector in vectors])
    matrix.setflags(write=False)
    return matrix


class _VectorTable:
    """Packed row storage shared by both memory kinds."""

    def __init__(self, vectors: Sequence[Hypervector], dim: int):
        self._dim = dim
        self._vectors = tuple(vectors)
        self._packed = _stack_packed(self._vectors, dim)
        self._bipolar: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self._dim

    def bipolar_matrix(self) -> np.ndarray:
        """Read-only int8 matrix of -1/+1 rows (built on first use)."""
        if self._bipolar is None:
            bits = np.unpackbits(self._packed, axis=1, count=self._dim, bitorder="little")
            matrix = (bits.astype(np.int8) << 1) - 1
            matrix.setflags(write=False)
            self._bipolar = matrix
        return self._bipolar

    def similarities(self, query: VectorLike) -> np.ndarray:
        """
        Dot product of the query with every stored row.

        Args:
            query: Hypervector or Accumulator of the memory's dimension

        Returns:
            int64 array with one score per row
        """
        if query.dim != self._dim:
            raise DimensionMismatchError(f"Query dimension {query.dim} != memory dimension {self._dim}")
        if isinstance(query, Hypervector):
            return self._dim - 2 * count_differences(self._packed, query.packed)
        matrix = self.bipolar_matrix()
        scores = np.empty(matrix.shape[0], dtype=np.int64)
        for start in range(0, matrix.shape[0], _SCAN_BLOCK):
            block = matrix[start:start + _SCAN_BLOCK].astype(np.int64)
            scores[start:start + _SCAN_BLOCK] = block @ query.values
        return scores

    def combine(self, weights: Sequence[int]) -> Accumulator:
        """Return the accumulator sum of weights[k] * row_k."""
        weights = np.asarray(weights, dtype=np.int64)
        if weights.shape != (len(self._vectors),):
            raise HDCError(f"Expected {len(self._vectors)} weights, got shape {weights.shape}")
        matrix = self.bipolar_matrix()
        total = np.zeros(self._dim, dtype=np.int64)
        for start in range(0, matrix.shape[0], _SCAN_BLOCK):
            block = matrix[start:start + _SCAN_BLOCK].astype(np.int64)
            total += weights[start:start + _SCAN_BLOCK] @ block
        return Accumulator(total, int(np.abs(weights).sum()))

    def _require_rows(self) -> None:
        if not self._vectors:
            raise EmptyMemoryError("Memory has no entries")


class ItemMemory(_VectorTable):
    """
    Named codebook of seed hypervectors with nearest-neighbour clean-up.

    Entry order is fixed at build time and defines tie-break order.
    """

    def __init__(
        self,
        names: Sequence[str],
        vectors: Sequence[Hypervector],
        dim: Optional[int] = None,
        tiebreak_seed: int = DEFAULT_TIEBREAK_SEED,
    ):
        names = tuple(str(name) for name in names)
        if len(names) != len(vectors):
            raise HDCError(f"{len(names)} names for {len(vectors)} vectors")
        if dim is None:
            if not vectors:
                raise HDCError("An empty ItemMemory needs an explicit dimension")
            dim = vectors[0].dim
        index = {}
        for position, name in enumerate(names):
            if name in index:
                raise HDCError(f"Duplicate item memory name '{name}'")
            index[name] = position
        super().__init__(vectors, dim)
        self._names = names
        self._index = index
        self._tiebreak_seed = int(tiebreak_seed)

    @classmethod
    def random(
        cls,
        names: Sequence[str],
        dim: int,
        rng: RandomSource,
        tiebreak_seed: Optional[int] = None,
    ) -> "ItemMemory":
        """
        Build a codebook of i.i.d. seed vectors.

        Args:
            names: Entry names in tie-break order
            dim: Dimension of every seed vector
            rng: Random source for the seed vectors
            tiebreak_seed: Seed of the tie-break sign sequence; derived from
                rng when it is an Rng and not given

        Returns:
            A new ItemMemory
        """
        if tiebreak_seed is None:
            tiebreak_seed = derive_seed(rng.seed, 0) if isinstance(rng, Rng) else DEFAULT_TIEBREAK_SEED
        vectors = random_hypervectors(len(names), dim, rng)
        return cls(names, vectors, dim=dim, tiebreak_seed=tiebreak_seed)

    @property
    def names(self) -> Tuple[str, ...]:
        return self._names

    @property
    def vectors(self) -> Tuple[Hypervector, ...]:
        return self._vectors

    @property
    def tiebreak_seed(self) -> int:
        return self._tiebreak_seed

    @property
    def tiebreak(self) -> Hypervector:
        """Tie-break sign sequence fixed at codebook creation."""
        return tiebreak_vector(self._dim, self._tiebreak_seed)

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def __iter__(self) -> Iterator[Tuple[str, Hypervector]]:
        return iter(zip(self._names, self._vectors))

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownSymbolError(f"Unknown symbol '{name}'") from None

    def vector(self, name: str) -> Hypervector:
        return self._vectors[self.index(name)]

    def cleanup(self, query: VectorLike) -> Match:
        """
        Return the entry with the highest dot product with the query.

        Raises:
            EmptyMemoryError: if the memory has no entries
            DimensionMismatchError: if the query dimension differs
        """
        self._require_rows()
        scores = self.similarities(query)
        best = int(np.argmax(scores))
        return Match(self._names[best], self._vectors[best], int(scores[best]))

    def rank(self, query: VectorLike, k: Optional[int] = None) -> List[Match]:
        """Return the k best matches, best first, ties by entry index."""
        self._require_rows()
        scores = self.similarities(query)
        order = np.argsort(-scores, kind="stable")
        if k is not None:
            order = order[:k]
        return [Match(self._names[i], self._vectors[i], int(scores[i])) for i in order]

    def project(self, query: VectorLike, divisor: int = 1) -> Accumulator:
        """
        Project a query onto the span of the entries: sum_k dot(query, v_k) * v_k.

        Args:
            query: Hypervector or Accumulator
            divisor: When greater than 1, every weight is divided by it
                (rounding half away from zero) before recombination

        Returns:
            Exact integer Accumulator
        """
        self._require_rows()
        return self.combine(round_divide(self.similarities(query), divisor))

    def permuted(self, k: int) -> "ItemMemory":
        """Return a memory whose entries are all rotated by k."""
        return ItemMemory(
            self._names,
            [permute(vector, k) for vector in self._vectors],
            dim=self._dim,
            tiebreak_seed=self._tiebreak_seed,
        )

    def save(self, path: str) -> None:
        save_vectors(path, list(self), self._dim, self._tiebreak_seed)

    @classmethod
    def load(cls, path: str) -> "ItemMemory":
        dim, tiebreak_seed, items = load_vectors(path)
        return cls([name for name, _ in items], [vector for _, vector in items], dim=dim, tiebreak_seed=tiebreak_seed)

    def __repr__(self) -> str:
        return f"ItemMemory(dim={self._dim}, entries={len(self)})"


# Codebook of symbols; same structure as an item memory.
SymbolCodebook = ItemMemory


class HeteroMemory(_VectorTable):
    """
    Address -> content store keyed by nearest address match.

    Addresses must be pairwise distinct (no dot product equal to N).
    """

    def __init__(self, addresses: Sequence[Hypervector], contents: Sequence[Mapping[str, Any]]):
        if len(addresses) != len(contents):
            raise HDCError(f"{len(addresses)} addresses for {len(contents)} content records")
        if not addresses:
            raise EmptyMemoryError("A heteroassociative memory needs at least one row")
        super().__init__(addresses, addresses[0].dim)
        self._contents = tuple(dict(content) for content in contents)
        self._check_distinct()

    def _check_distinct(self) -> None:
        _, first_rows, counts = np.unique(self._packed, axis=0, return_index=True, return_counts=True)
        if np.any(counts > 1):
            repeated = sorted(int(i) for i in first_rows[counts > 1])
            raise DuplicateAddressError(f"Repeated address entries at rows {repeated}; regenerate the item memories")

    @property
    def addresses(self) -> Tuple[Hypervector, ...]:
        return self._vectors

    @property
    def contents(self) -> Tuple[Dict[str, Any], ...]:
        return tuple(dict(content) for content in self._contents)

    def __len__(self) -> int:
        return len(self._vectors)

    def lookup_row(self, query: VectorLike) -> Tuple[int, int]:
        """Return (row index, score) of the best-matching address."""
        scores = self.similarities(query)
        best = int(np.argmax(scores))
        return best, int(scores[best])

    def lookup(self, query: VectorLike) -> Dict[str, Any]:
        """Return a copy of the content of the best-matching row."""
        row, _ = self.lookup_row(query)
        return dict(self._contents[row])

    def lookup_rows(self, queries: np.ndarray) -> np.ndarray:
        """
        Batch lookup for a matrix of bipolar queries (one per row).

        Returns:
            Array of best row indices, ties to the lowest index
        """
        queries = np.asarray(queries)
        if queries.ndim != 2 or queries.shape[1] != self._dim:
            raise DimensionMismatchError(f"Expected queries of shape (m, {self._dim}), got {queries.shape}")
        scores = queries.astype(np.int32) @ self.bipolar_matrix().T.astype(np.int32)
        return np.argmax(scores, axis=1)

    def save(self, path: str) -> None:
        """Write the addresses as a codebook file and the payloads as `<path>.payload.tsv`."""
        items = [(f"row{i}", vector) for i, vector in enumerate(self._vectors)]
        save_vectors(path, items, self._dim)
        fields = sorted({key for content in self._contents for key in content})
        with open(path + ".payload.tsv", "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, delimiter="\t", lineterminator="\n")
            writer.writerow(["row", *fields])
            for i, content in enumerate(self._contents):
                writer.writerow([i, *(content.get(field, "") for field in fields)])

    @classmethod
    def load(cls, path: str) -> "HeteroMemory":
        _, _, items = load_vectors(path)
        with open(path + ".payload.tsv", "r", encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f, delimiter="\t"))
        if not rows or rows[0][0] != "row":
            raise CodebookFormatError("Payload table must start with a 'row' header")
        fields = rows[0][1:]
        contents: List[Dict[str, str]] = [{} for _ in items]
        for line_number, record in enumerate(rows[1:], start=2):
            try:
                index = int(record[0])
            except (ValueError, IndexError) as e:
                raise CodebookFormatError(f"Malformed payload row on line {line_number}: {record!r}") from e
            if not 0 <= index < len(contents):
                raise CodebookFormatError(
                    f"Payload row index {index} on line {line_number} is outside 0..{len(contents) - 1}"
                )
            contents[index] = dict(zip(fields, record[1:]))
        return cls([vector for _, vector in items], contents)

    def __repr__(self) -> str:
        return f"HeteroMemory(dim={self._dim}, rows={len(self)})"
