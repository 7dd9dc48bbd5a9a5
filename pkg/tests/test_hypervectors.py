import io
import math

import numpy as np
import pytest

from hypervectors import (
    Accumulator,
    AccumulatorOverflowError,
    CodebookFormatError,
    DimensionMismatchError,
    HDCError,
    Hypervector,
    InvalidDimensionError,
    InvalidProbabilityError,
    Rng,
    as_generator,
    bind,
    bind_all,
    bundle,
    accumulate,
    dot,
    flip_noise,
    hamming,
    normalize,
    permute,
    random_hypervector,
    random_hypervectors,
    read_vectors,
    similarity,
    tiebreak_vector,
    write_vectors,
)


def _reference(x):
    return x.bipolar().astype(np.int64) if isinstance(x, Hypervector) else x.values


@pytest.mark.parametrize("dim", [64, 1024, 10000, 13])
def test_bind_is_self_inverse_commutative_and_associative(dim):
    rng = Rng(dim)
    for trial in range(50):
        a, b, c = random_hypervectors(3, dim, rng.split(trial))
        assert bind(bind(a, b), b) == a
        assert bind(a, b) == bind(b, a)
        assert bind(bind(a, b), c) == bind(a, bind(b, c))
        assert np.array_equal(bind(a, b).bipolar(), a.bipolar() * b.bipolar())


@pytest.mark.parametrize("dim", [64, 1024, 10000])
def test_bind_distributes_over_addition(dim):
    rng = Rng(7)
    for trial in range(20):
        a, b, c = random_hypervectors(3, dim, rng.split(trial))
        assert bind(a + b, c) == bundle([bind(a, c), bind(b, c)])


@pytest.mark.parametrize("dim", [64, 1024, 10000])
def test_permutation_distributes_and_preserves_similarity(dim):
    rng = Rng(11)
    for trial in range(20):
        a, b = random_hypervectors(2, dim, rng.split(trial))
        k = trial * 37 - 100
        assert permute(bind(a, b), k) == bind(permute(a, k), permute(b, k))
        assert permute(a + b, k) == permute(a, k) + permute(b, k)
        assert dot(permute(a, k), permute(b, k)) == dot(a, b)
        assert permute(permute(a, k), -k) == a
        c = random_hypervector(dim, rng.split(trial, 1))
        assert dot(bind(a, c), bind(b, c)) == dot(a, b)


def test_permute_rotates_towards_higher_indices():
    x = Hypervector.from_bipolar([1, -1, -1, -1])
    assert list(permute(x, 1).bipolar()) == [-1, 1, -1, -1]
    assert permute(x, 4) == x
    acc = Accumulator([1, 2, 3, 4])
    assert list(permute(acc, 1).values) == [4, 1, 2, 3]
    assert list(permute(acc, -5).values) == [2, 3, 4, 1]


def test_randomization_of_the_three_operations():
    dim = 10000
    rng = Rng(99)
    bound = 4 * math.sqrt(dim)
    outside = 0
    trials = 1000
    for trial in range(trials):
        a, b = random_hypervectors(2, dim, rng.split(trial))
        for value in (dot(bind(a, b), a), dot(permute(a, 1), a), dot(a, b)):
            outside += abs(value) > bound
    assert outside <= 3 * trials * 0.001 + 1


def test_dot_extremes_and_hamming(rng):
    a = random_hypervector(1000, rng)
    assert dot(a, a) == 1000
    assert dot(a, -a) == -1000
    assert similarity(a, -a) == -1.0
    b = random_hypervector(1000, rng.split(1))
    assert dot(a, b) == 1000 - 2 * hamming(a, b)
    assert dot(a + b, a) == 1000 + dot(a, b)


def test_dimension_mismatch_is_rejected(rng):
    a = random_hypervector(64, rng)
    b = random_hypervector(65, rng)
    with pytest.raises(DimensionMismatchError):
        bind(a, b)
    with pytest.raises(DimensionMismatchError):
        dot(a, b)
    with pytest.raises(DimensionMismatchError):
        bundle([a, b])


@pytest.mark.parametrize("dim", [0, -3, 2.5, True])
def test_invalid_dimension(dim, rng):
    with pytest.raises(InvalidDimensionError):
        random_hypervector(dim, rng)


def test_random_generation_is_reproducible():
    assert random_hypervector(777, Rng(5)) == random_hypervector(777, Rng(5))
    assert random_hypervector(777, Rng(5)) != random_hypervector(777, Rng(6))
    assert Rng(5).split(1, 2) == Rng(5).split(1, 2)
    assert Rng(5).split(1) != Rng(5).split(2)


def test_unknown_rng_algorithm_rejected():
    with pytest.raises(HDCError):
        Rng(1, "mersenne")
    with pytest.raises(HDCError):
        Rng(-1)
    with pytest.raises(HDCError):
        as_generator("seed")


def test_accumulator_subtraction_restores_exactly(rng):
    a, b = random_hypervectors(2, 500, rng)
    acc = bundle([a, a, b])
    assert accumulate(accumulate(acc, b), b, -1) == acc
    assert (acc - b) == bundle([a, a])
    assert acc.weight == 3
    assert acc.max_abs() <= acc.weight


def test_empty_bundle_needs_dimension():
    with pytest.raises(InvalidDimensionError):
        bundle([])
    assert bundle([], dim=8).is_zero()


def test_normalize_majority_and_tiebreak(rng):
    a, b, c = random_hypervectors(3, 2000, rng)
    majority = normalize(bundle([a, b, c]))
    expected = np.sign(a.bipolar().astype(int) + b.bipolar() + c.bipolar())
    assert np.array_equal(majority.bipolar(), expected)

    zero = Accumulator.zeros(2000)
    tiebreak = tiebreak_vector(2000, 3)
    assert normalize(zero, tiebreak) == tiebreak
    assert normalize(zero) == normalize(zero)
    assert normalize(a) is a


def test_normalized_addition_is_approximately_associative():
    dim = 10000
    rng = Rng(2024)
    for trial in range(100):
        a, b, c = random_hypervectors(3, dim, rng.split(trial))
        left = normalize(normalize(a + b) + c)
        right = normalize(a + normalize(b + c))
        assert dot(left, right) > 0.5 * dim


def test_flip_noise_exact_count(rng):
    a = random_hypervector(10000, rng)
    assert flip_noise(a, 0.0, rng) == a
    assert flip_noise(a, 1.0, rng) == -a
    noisy = flip_noise(a, 0.25, rng.split(1))
    assert dot(a, noisy) == 5000
    assert hamming(a, flip_noise(a, 0.1, rng.split(2))) == 1000


@pytest.mark.parametrize("p", [-0.1, 1.5, float("nan")])
def test_flip_noise_rejects_bad_probability(p, rng):
    with pytest.raises(InvalidProbabilityError):
        flip_noise(random_hypervector(16, rng), p, rng)


def test_multiply_overflow_guard():
    big = Accumulator([2 ** 40, 1], weight=2 ** 40)
    with pytest.raises(AccumulatorOverflowError):
        big.multiply(big)


def test_bit_packing_order():
    x = Hypervector.from_bits([1, 0, 0, 0, 0, 0, 0, 0, 1])
    assert x.to_hex() == "0101"
    assert x[0] == 1 and x[1] == -1 and x[8] == 1
    assert Hypervector.from_hex("0101", 9) == x


def test_vector_file_round_trip_and_errors(rng):
    vectors = random_hypervectors(3, 100, rng)
    stream = io.StringIO()
    write_vectors(stream, [("a", vectors[0]), ("b", vectors[1]), ("c", vectors[2])], 100, tiebreak_seed=42)
    stream.seek(0)
    dim, seed, items = read_vectors(stream)
    assert (dim, seed) == (100, 42)
    assert [name for name, _ in items] == ["a", "b", "c"]
    assert items[1][1] == vectors[1]

    with pytest.raises(CodebookFormatError):
        read_vectors(io.StringIO("not a codebook\n"))
    with pytest.raises(CodebookFormatError):
        read_vectors(io.StringIO("# hdc-vectors v1\ndim=8\ntiebreak_seed=0\ncount=2\na\t00\n"))
