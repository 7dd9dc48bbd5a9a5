"""
Hypervector Core Module

This module defines the two value types everything else is built from:

1. Hypervector - a fixed-dimension bipolar (+1/-1) vector stored bit-packed
   (one bit per component, bit 1 <-> +1, bit 0 <-> -1, little bit order)
2. Accumulator - an exact integer vector holding unnormalized superpositions

It implements the three Multiply-Add-Permute operations (bind, accumulate,
permute), the dot-product similarity, normalization with deterministic
tie-breaking, seeded random generation and exact-count noise injection.
All values are immutable once built.
"""

import functools
import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
DEFAULT_ALGORITHM = "philox"
DEFAULT_TIEBREAK_SEED = 0

# Sub-seed key reserved for tie-break sign sequences.
_TIEBREAK_KEY = 0x7E1E

# Largest magnitude an accumulator product may reach before int64 is unsafe.
_INT64_SAFE = 1 << 62

_BIT_GENERATORS = {
    "philox": np.random.Philox,
    "pcg64": np.random.PCG64,
}


class HDCError(ValueError):
    """Base class for all toolkit errors."""


class InvalidDimensionError(HDCError):
    """Raised when a dimension is not a positive integer."""


class DimensionMismatchError(HDCError):
    """Raised when two operands have different dimensions."""


class InvalidProbabilityError(HDCError):
    """Raised when a probability lies outside [0, 1]."""


class EmptyMemoryError(HDCError):
    """Raised when querying a memory without entries."""


class UnknownSymbolError(HDCError, KeyError):
    """Raised when a name does not resolve in a codebook."""

    def __str__(self) -> str:
        return ValueError.__str__(self)


class DuplicateAddressError(HDCError):
    """Raised when a memory would hold two identical vectors."""


class AccumulatorOverflowError(HDCError):
    """Raised when an accumulator product would leave the exact int64 range."""


class CodebookFormatError(HDCError):
    """Raised when a serialized codebook cannot be parsed."""


class EmptyStackError(HDCError):
    """Raised when popping from an empty stack."""


# ---------------------------------------------------------------------------
# Random number generation
# ---------------------------------------------------------------------------

def derive_seed(seed: int, *keys: int) -> int:
    """
    Derive an independent 64-bit sub-seed from a master seed and integer keys.

    Args:
        seed: Master seed
        *keys: Non-negative integers (trial index, grid index, ...)

    Returns:
        A 64-bit unsigned integer seed
    """
    sequence = np.random.SeedSequence([int(seed), *(int(k) for k in keys)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class Rng:
    """
    A named, seeded, counter-based generator description.

    Rng is a value: it is never advanced in place. Every call to generator()
    starts the same stream, and split() derives independent children.
    """

    seed: int
    algorithm: str = DEFAULT_ALGORITHM

    def __post_init__(self):
        if not 0 <= int(self.seed) < (1 << 64):
            raise HDCError(f"Seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.algorithm not in _BIT_GENERATORS:
            raise HDCError(
                f"Unknown generator algorithm '{self.algorithm}' "
                f"(expected one of {sorted(_BIT_GENERATORS)})"
            )

    def generator(self) -> np.random.Generator:
        """Return a fresh numpy Generator positioned at the start of this stream."""
        bit_generator = _BIT_GENERATORS[self.algorithm](np.random.SeedSequence(int(self.seed)))
        return np.random.Generator(bit_generator)

    def split(self, *keys: int) -> "Rng":
        """Return the child Rng identified by the given keys."""
        return Rng(derive_seed(self.seed, *keys), self.algorithm)


RandomSource = Union[Rng, np.random.Generator, int]


def as_generator(rng: RandomSource) -> np.random.Generator:
    """
    Turn an Rng, a raw seed or an existing Generator into a Generator.

    Passing a Generator lets long loops draw from one stream without
    re-seeding on every step.
    """
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, Rng):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return Rng(int(rng)).generator()
    raise HDCError(f"Cannot draw random numbers from {type(rng).__name__}")


# ---------------------------------------------------------------------------
# Bit helpers
# ---------------------------------------------------------------------------

def popcount8(x: np.ndarray) -> np.ndarray:
    """SWAR population count on uint8 values."""
    x = (x & 0x55) + ((x >> 1) & 0x55)
    x = (x & 0x33) + ((x >> 2) & 0x33)
    return (x & 0x0F) + ((x >> 4) & 0x0F)


_POPCOUNT8 = popcount8(np.arange(256, dtype=np.uint8)).astype(np.int64)


def _nbytes(dim: int) -> int:
    return (dim + 7) // 8


def _tail_mask(dim: int) -> int:
    remainder = dim % 8
    return (1 << remainder) - 1 if remainder else 0xFF


def _check_dim(dim) -> int:
    if isinstance(dim, bool) or not isinstance(dim, (int, np.integer)) or dim < 1:
        raise InvalidDimensionError(f"Dimension must be a positive integer, got {dim!r}")
    return int(dim)


def count_differences(packed_a: np.ndarray, packed_b: np.ndarray) -> np.ndarray:
    """
    Count differing bits between packed rows.

    Args:
        packed_a: uint8 array of shape (..., nbytes)
        packed_b: uint8 array broadcastable against packed_a

    Returns:
        int64 array of differing-bit counts along the last axis
    """
    return _POPCOUNT8[np.bitwise_xor(packed_a, packed_b)].sum(axis=-1)


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------

class Hypervector:
    """A bipolar hypervector of fixed dimension, stored bit-packed."""

    __slots__ = ("_packed", "_dim")

    def __init__(self, packed: np.ndarray, dim: int):
        dim = _check_dim(dim)
        packed = np.array(packed, dtype=np.uint8).reshape(-1)
        if packed.shape[0] != _nbytes(dim):
            raise InvalidDimensionError(
                f"Packed data holds {packed.shape[0]} bytes, dimension {dim} needs {_nbytes(dim)}"
            )
        packed[-1] &= _tail_mask(dim)
        packed.setflags(write=False)
        self._packed = packed
        self._dim = dim

    @classmethod
    def _wrap(cls, packed: np.ndarray, dim: int) -> "Hypervector":
        # Caller guarantees a fresh, tail-masked uint8 buffer.
        vector = object.__new__(cls)
        packed.setflags(write=False)
        vector._packed = packed
        vector._dim = dim
        return vector

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "Hypervector":
        """Build from a 0/1 sequence (0 <-> -1, 1 <-> +1)."""
        bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
        dim = _check_dim(bits.shape[0])
        if np.any(bits > 1):
            raise HDCError("Bit values must be 0 or 1")
        return cls._wrap(np.packbits(bits, bitorder="little"), dim)

    @classmethod
    def from_bipolar(cls, values: Sequence[int]) -> "Hypervector":
        """Build from a sequence of -1/+1 values."""
        values = np.asarray(values).reshape(-1)
        _check_dim(values.shape[0])
        if not np.all((values == 1) | (values == -1)):
            raise HDCError("Every component of a hypervector must be -1 or +1")
        return cls.from_bits((values > 0).astype(np.uint8))

    @classmethod
    def ones(cls, dim: int) -> "Hypervector":
        """The all-(+1) vector, identity of binding."""
        dim = _check_dim(dim)
        packed = np.full(_nbytes(dim), 0xFF, dtype=np.uint8)
        packed[-1] &= _tail_mask(dim)
        return cls._wrap(packed, dim)

    @classmethod
    def from_hex(cls, text: str, dim: int) -> "Hypervector":
        try:
            raw = bytes.fromhex(text.strip())
        except ValueError as e:
            raise CodebookFormatError(f"Invalid hex vector data: {e}") from e
        return cls(np.frombuffer(raw, dtype=np.uint8), dim)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def packed(self) -> np.ndarray:
        """Read-only packed bits (component 0 = least-significant bit of byte 0)."""
        return self._packed

    def bits(self) -> np.ndarray:
        return np.unpackbits(self._packed, count=self._dim, bitorder="little")

    def bipolar(self) -> np.ndarray:
        """Return the components as a fresh int8 array of -1/+1."""
        return (self.bits().astype(np.int8) << 1) - 1

    def to_hex(self) -> str:
        return self._packed.tobytes().hex()

    def __len__(self) -> int:
        return self._dim

    def __getitem__(self, index: int) -> int:
        if not -self._dim <= index < self._dim:
            raise IndexError(index)
        index %= self._dim
        return 1 if (self._packed[index // 8] >> (index % 8)) & 1 else -1

    def __neg__(self) -> "Hypervector":
        packed = np.bitwise_not(self._packed)
        packed[-1] &= _tail_mask(self._dim)
        return Hypervector._wrap(packed, self._dim)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Hypervector):
            return NotImplemented
        return self._dim == other._dim and np.array_equal(self._packed, other._packed)

    def __hash__(self) -> int:
        return hash((self._dim, self._packed.tobytes()))

    def __repr__(self) -> str:
        preview = self.to_hex()[:16]
        return f"Hypervector(dim={self._dim}, hex={preview}{'...' if len(self._packed) > 8 else ''})"


class Accumulator:
    """
    Exact integer superposition of hypervectors.

    weight counts the bipolar addends folded in (for products and projections
    it is an upper bound on every |component|). Equality ignores weight.
    """

    __slots__ = ("_values", "_weight")

    def __init__(self, values: Sequence[int], weight: int = 0):
        values = np.array(values, dtype=np.int64).reshape(-1)
        _check_dim(values.shape[0])
        if weight < 0:
            raise HDCError(f"Accumulator weight must be non-negative, got {weight}")
        values.setflags(write=False)
        self._values = values
        self._weight = int(weight)

    @classmethod
    def _wrap(cls, values: np.ndarray, weight: int) -> "Accumulator":
        acc = object.__new__(cls)
        values.setflags(write=False)
        acc._values = values
        acc._weight = int(weight)
        return acc

    @classmethod
    def zeros(cls, dim: int) -> "Accumulator":
        return cls._wrap(np.zeros(_check_dim(dim), dtype=np.int64), 0)

    @classmethod
    def from_hypervector(cls, vector: Hypervector, sign: int = 1) -> "Accumulator":
        _check_sign(sign)
        return cls._wrap(vector.bipolar().astype(np.int64) * sign, 1)

    @property
    def dim(self) -> int:
        return self._values.shape[0]

    @property
    def weight(self) -> int:
        return self._weight

    @property
    def values(self) -> np.ndarray:
        """Read-only view of the integer components."""
        return self._values

    def components(self) -> np.ndarray:
        return self._values.copy()

    def max_abs(self) -> int:
        return int(np.abs(self._values).max())

    def is_zero(self) -> bool:
        return not np.any(self._values)

    def added(self, vector: "VectorLike", sign: int = 1) -> "Accumulator":
        """Return self + sign * vector."""
        _check_sign(sign)
        _check_same_dim(self, vector)
        if isinstance(vector, Hypervector):
            other = vector.bipolar().astype(np.int64)
            weight = 1
        else:
            other = vector.values
            weight = vector.weight
        return Accumulator._wrap(self._values + sign * other, self._weight + weight)

    def scaled(self, factor: int) -> "Accumulator":
        factor = int(factor)
        return Accumulator._wrap(self._values * factor, self._weight * abs(factor))

    def multiply(self, other: "VectorLike") -> "Accumulator":
        """
        Component-wise product with another accumulator or hypervector.

        Raises:
            AccumulatorOverflowError: if the product could leave the exact int64 range
        """
        _check_same_dim(self, other)
        if isinstance(other, Hypervector):
            return Accumulator._wrap(self._values * other.bipolar(), self._weight)
        bound = self.max_abs() * other.max_abs()
        if bound > _INT64_SAFE:
            raise AccumulatorOverflowError(
                f"Component product bound {bound} exceeds the exact int64 range"
            )
        return Accumulator._wrap(self._values * other.values, self._weight * other.weight)

    def __add__(self, other) -> "Accumulator":
        if not isinstance(other, (Hypervector, Accumulator)):
            return NotImplemented
        return self.added(other, 1)

    def __radd__(self, other) -> "Accumulator":
        return self.__add__(other)

    def __sub__(self, other) -> "Accumulator":
        if not isinstance(other, (Hypervector, Accumulator)):
            return NotImplemented
        return self.added(other, -1)

    def __neg__(self) -> "Accumulator":
        return Accumulator._wrap(-self._values, self._weight)

    def __len__(self) -> int:
        return self.dim

    def __eq__(self, other) -> bool:
        if not isinstance(other, Accumulator):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self._values, other._values)

    __hash__ = None

    def __repr__(self) -> str:
        head = ", ".join(str(v) for v in self._values[:6])
        return f"Accumulator(dim={self.dim}, weight={self._weight}, values=[{head}{', ...' if self.dim > 6 else ''}])"


VectorLike = Union[Hypervector, Accumulator]


def _check_sign(sign: int) -> None:
    if sign not in (1, -1):
        raise HDCError(f"Sign must be +1 or -1, got {sign}")


def _check_same_dim(a: VectorLike, b: VectorLike) -> None:
    if a.dim != b.dim:
        raise DimensionMismatchError(f"Dimension mismatch: {a.dim} != {b.dim}")


def _as_int64(x: VectorLike) -> np.ndarray:
    if isinstance(x, Hypervector):
        return x.bipolar().astype(np.int64)
    return x.values


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def random_hypervector(dim: int, rng: RandomSource) -> Hypervector:
    """
    Draw an i.i.d. bipolar hypervector, each component +1 with probability 1/2.

    Args:
        dim: Number of components
        rng: Rng (or Generator) providing the random stream

    Returns:
        A new Hypervector
    """
    dim = _check_dim(dim)
    return random_hypervectors(1, dim, rng)[0]


def random_hypervectors(count: int, dim: int, rng: RandomSource) -> List[Hypervector]:
    """Draw count i.i.d. hypervectors from one stream."""
    dim = _check_dim(dim)
    generator = as_generator(rng)
    nbytes = _nbytes(dim)
    raw = np.frombuffer(generator.bytes(count * nbytes), dtype=np.uint8).reshape(count, nbytes).copy()
    raw[:, -1] &= _tail_mask(dim)
    return [Hypervector._wrap(row.copy(), dim) for row in raw]


@functools.lru_cache(maxsize=256)
def tiebreak_vector(dim: int, seed: int = DEFAULT_TIEBREAK_SEED) -> Hypervector:
    """The deterministic per-component sign sequence used to resolve zero sums."""
    return random_hypervector(dim, Rng(seed).split(_TIEBREAK_KEY))


def bind(a: VectorLike, b: VectorLike) -> VectorLike:
    """
    Multiply (bind) two vectors component-wise.

    Two hypervectors bind by XNOR on the packed words (bipolar product under
    the 1 <-> +1 bit mapping). An accumulator bound with a hypervector flips
    the signs of its components; two accumulators multiply component-wise.

    Raises:
        DimensionMismatchError: if the dimensions differ
    """
    _check_same_dim(a, b)
    if isinstance(a, Hypervector) and isinstance(b, Hypervector):
        packed = np.bitwise_not(np.bitwise_xor(a.packed, b.packed))
        packed[-1] &= _tail_mask(a.dim)
        return Hypervector._wrap(packed, a.dim)
    if isinstance(a, Hypervector):
        a, b = b, a
    return a.multiply(b)


def bind_all(*vectors: VectorLike) -> VectorLike:
    """Bind any number of vectors together (at least one)."""
    if not vectors:
        raise HDCError("bind_all needs at least one vector")
    result = vectors[0]
    for vector in vectors[1:]:
        result = bind(result, vector)
    return result


def accumulate(acc: Accumulator, vector: VectorLike, sign: int = 1) -> Accumulator:
    """Return acc + sign * vector; subtracting a previous addend restores acc exactly."""
    return acc.added(vector, sign)


def bundle(vectors: Iterable[VectorLike], dim: Optional[int] = None) -> Accumulator:
    """
    Sum vectors into an accumulator.

    Args:
        vectors: Hypervectors and/or accumulators of equal dimension
        dim: Dimension to use when vectors is empty

    Returns:
        The exact integer sum
    """
    vectors = list(vectors)
    if not vectors:
        if dim is None:
            raise InvalidDimensionError("Cannot bundle an empty collection without a dimension")
        return Accumulator.zeros(dim)
    expected = vectors[0].dim
    if dim is not None and dim != expected:
        raise DimensionMismatchError(f"Dimension mismatch: {dim} != {expected}")
    total = np.zeros(expected, dtype=np.int64)
    weight = 0
    for vector in vectors:
        if vector.dim != expected:
            raise DimensionMismatchError(f"Dimension mismatch: {expected} != {vector.dim}")
        total += _as_int64(vector)
        weight += 1 if isinstance(vector, Hypervector) else vector.weight
    return Accumulator._wrap(total, weight)


def normalize(acc: VectorLike, tiebreak: Optional[Hypervector] = None) -> Hypervector:
    """
    Apply the majority rule: sign of every component, zeros from the tie-break vector.

    Args:
        acc: Accumulator to bipolarize (a Hypervector is returned unchanged)
        tiebreak: Sign sequence for zero components; defaults to the
            tie-break vector of DEFAULT_TIEBREAK_SEED

    Returns:
        A bipolar Hypervector
    """
    if isinstance(acc, Hypervector):
        return acc
    values = acc.values
    bits = values > 0
    zeros = values == 0
    if np.any(zeros):
        if tiebreak is None:
            tiebreak = tiebreak_vector(acc.dim)
        _check_same_dim(acc, tiebreak)
        bits = np.where(zeros, tiebreak.bits().astype(bool), bits)
    return Hypervector._wrap(np.packbits(bits.astype(np.uint8), bitorder="little"), acc.dim)


def permute(x: VectorLike, k: int = 1) -> VectorLike:
    """
    Rotate components cyclically: component i moves to (i + k) mod N.

    k may be negative or exceed the dimension.
    """
    k = int(k) % x.dim
    if k == 0:
        return x
    if isinstance(x, Hypervector):
        bits = np.roll(x.bits(), k)
        return Hypervector._wrap(np.packbits(bits, bitorder="little"), x.dim)
    return Accumulator._wrap(np.roll(x.values, k), x.weight)


def dot(a: VectorLike, b: VectorLike) -> int:
    """
    Exact integer dot product.

    Between two hypervectors it is N - 2 * popcount(a XOR b).
    """
    _check_same_dim(a, b)
    if isinstance(a, Hypervector) and isinstance(b, Hypervector):
        return a.dim - 2 * int(count_differences(a.packed, b.packed))
    return int(np.dot(_as_int64(a), _as_int64(b)))


def similarity(a: VectorLike, b: VectorLike) -> float:
    """Dot product scaled by the dimension."""
    return dot(a, b) / a.dim


def hamming(a: Hypervector, b: Hypervector) -> int:
    _check_same_dim(a, b)
    return int(count_differences(a.packed, b.packed))


def flip_noise(vector: Hypervector, p: float, rng: RandomSource) -> Hypervector:
    """
    Flip the signs of exactly round(p * N) distinct, uniformly chosen components.

    Args:
        vector: Hypervector to corrupt
        p: Bit error rate in [0, 1]
        rng: Random source choosing the positions

    Returns:
        The corrupted Hypervector

    Raises:
        InvalidProbabilityError: if p lies outside [0, 1]
    """
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise InvalidProbabilityError(f"Flip probability must lie in [0, 1], got {p}")
    count = int(math.floor(p * vector.dim + 0.5))
    if count == 0:
        return vector
    if count == vector.dim:
        return -vector
    positions = as_generator(rng).choice(vector.dim, size=count, replace=False)
    bits = vector.bits()
    bits[positions] ^= 1
    return Hypervector._wrap(np.packbits(bits, bitorder="little"), vector.dim)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_HEADER = "# hdc-vectors"


def write_vectors(
    stream: TextIO,
    items: Sequence[Tuple[str, Hypervector]],
    dim: int,
    tiebreak_seed: int = DEFAULT_TIEBREAK_SEED,
) -> None:
    """
    Write named vectors in the self-describing text format.

    The header holds the format version, dim and tie-break seed; each record
    is a name, a tab and the hex-encoded packed bits.
    """
    stream.write(f"{_HEADER} v{FORMAT_VERSION}\n")
    stream.write(f"dim={dim}\n")
    stream.write(f"tiebreak_seed={tiebreak_seed}\n")
    stream.write(f"count={len(items)}\n")
    for name, vector in items:
        if any(c in name for c in "\t\r\n") or not name:
            raise CodebookFormatError(f"Vector name {name!r} cannot be serialized")
        if vector.dim != dim:
            raise DimensionMismatchError(f"Vector '{name}' has dimension {vector.dim}, expected {dim}")
        stream.write(f"{name}\t{vector.to_hex()}\n")


def read_vectors(stream: TextIO) -> Tuple[int, int, List[Tuple[str, Hypervector]]]:
    """
    Parse the text format written by write_vectors.

    Returns:
        Tuple of (dim, tiebreak_seed, list of (name, Hypervector))
    """
    lines = [line.rstrip("\r\n") for line in stream]
    if not lines or not lines[0].startswith(_HEADER):
        raise CodebookFormatError("Missing codebook header")
    version = lines[0][len(_HEADER):].strip()
    if version != f"v{FORMAT_VERSION}":
        raise CodebookFormatError(f"Unsupported codebook version '{version}'")
    fields = {}
    for line in lines[1:4]:
        key, sep, value = line.partition("=")
        if not sep:
            raise CodebookFormatError(f"Malformed header line: {line!r}")
        fields[key] = value
    try:
        dim = _check_dim(int(fields["dim"]))
        tiebreak_seed = int(fields["tiebreak_seed"])
        count = int(fields["count"])
    except (KeyError, ValueError) as e:
        raise CodebookFormatError(f"Malformed codebook header: {e}") from e
    items = []
    for line in lines[4:]:
        if not line:
            continue
        name, sep, data = line.partition("\t")
        if not sep:
            raise CodebookFormatError(f"Malformed vector record: {line!r}")
        items.append((name, Hypervector.from_hex(data, dim)))
    if len(items) != count:
        raise CodebookFormatError(f"Header announces {count} vectors, found {len(items)}")
    return dim, tiebreak_seed, items


def save_vectors(path: str, items: Sequence[Tuple[str, Hypervector]], dim: int, tiebreak_seed: int = DEFAULT_TIEBREAK_SEED) -> None:
    with open(path, "w", encoding="utf-8") as f:
        write_vectors(f, items, dim, tiebreak_seed)
    logger.info("Wrote %d vectors (dim %d) to %s", len(items), dim, path)


def load_vectors(path: str) -> Tuple[int, int, List[Tuple[str, Hypervector]]]:
    with open(path, "r", encoding="utf-8") as f:
        return read_vectors(f)
