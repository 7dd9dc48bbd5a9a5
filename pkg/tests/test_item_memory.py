import numpy as np
import pytest

from hypervectors import (
    Accumulator,
    CodebookFormatError,
    DimensionMismatchError,
    DuplicateAddressError,
    EmptyMemoryError,
    HDCError,
    Hypervector,
    UnknownSymbolError,
    bundle,
    dot,
    flip_noise,
    permute,
    random_hypervectors,
)
from item_memory import HeteroMemory, ItemMemory, round_divide


def test_cleanup_recovers_noisy_entries(rng):
    memory = ItemMemory.random([f"x{i}" for i in range(50)], 2048, rng)
    for i, (name, vector) in enumerate(memory):
        noisy = flip_noise(vector, 0.3, rng.split(i))
        match = memory.cleanup(noisy)
        assert match.name == name
        assert match.score == dot(noisy, vector)


def test_cleanup_ties_go_to_lowest_index():
    a = Hypervector.from_bipolar([1, 1, 1, 1])
    b = Hypervector.from_bipolar([1, 1, -1, -1])
    c = Hypervector.from_bipolar([1, -1, 1, -1])
    memory = ItemMemory(["a", "b", "c"], [a, b, c])
    query = Hypervector.from_bipolar([1, 1, -1, 1])
    # dot with a = 2, with b = 2, with c = -2
    assert memory.cleanup(query).name == "a"
    assert [m.name for m in memory.rank(query)] == ["a", "b", "c"]


def test_cleanup_of_accumulator_picks_the_dominant_addend(rng):
    memory = ItemMemory.random(["a", "b", "c", "d"], 4096, rng)
    acc = bundle([memory.vector("b"), memory.vector("b"), memory.vector("c")])
    assert memory.cleanup(acc).name == "b"
    assert [m.name for m in memory.rank(acc, k=2)] == ["b", "c"]


def test_errors(rng):
    empty = ItemMemory([], [], dim=32)
    with pytest.raises(EmptyMemoryError):
        empty.cleanup(random_hypervectors(1, 32, rng)[0])
    memory = ItemMemory.random(["a"], 32, rng)
    with pytest.raises(DimensionMismatchError):
        memory.cleanup(random_hypervectors(1, 33, rng)[0])
    with pytest.raises(UnknownSymbolError):
        memory.vector("zzz")
    with pytest.raises(KeyError):
        memory.index("zzz")
    with pytest.raises(HDCError):
        ItemMemory(["a", "a"], random_hypervectors(2, 32, rng))
    assert "a" in memory and "b" not in memory


def test_project_is_linear_and_divisor_rescales(rng):
    memory = ItemMemory.random(["a", "b", "c"], 1024, rng)
    query = bundle([memory.vector("a"), memory.vector("c")])
    exact = memory.project(query)
    weights = memory.similarities(query)
    assert exact == memory.combine(weights)
    scaled = memory.project(query, divisor=1024)
    assert scaled == memory.combine(round_divide(weights, 1024))


def test_round_divide_half_away_from_zero():
    values = np.array([5, -5, 4, -4, 6, -6, 0])
    assert list(round_divide(values, 4)) == [1, -1, 1, -1, 2, -2, 0]
    assert list(round_divide(values, 1)) == list(values)
    with pytest.raises(HDCError):
        round_divide(values, 0)


def test_permuted_memory_keeps_names(rng):
    memory = ItemMemory.random(["a", "b"], 128, rng)
    rotated = memory.permuted(3)
    assert rotated.names == memory.names
    assert rotated.tiebreak_seed == memory.tiebreak_seed
    assert rotated.vector("a") != memory.vector("a")


def test_item_memory_save_load(tmp_path, rng):
    memory = ItemMemory.random(["alpha", "beta", "gamma"], 300, rng)
    path = str(tmp_path / "codebook.hdv")
    memory.save(path)
    loaded = ItemMemory.load(path)
    assert loaded.names == memory.names
    assert loaded.vectors == memory.vectors
    assert loaded.tiebreak == memory.tiebreak


def test_hetero_memory_lookup(rng):
    addresses = random_hypervectors(8, 512, rng)
    contents = [{"value": i} for i in range(8)]
    memory = HeteroMemory(addresses, contents)
    for i, address in enumerate(addresses):
        noisy = flip_noise(address, 0.2, rng.split(i))
        assert memory.lookup(noisy) == {"value": i}
        row, score = memory.lookup_row(noisy)
        assert row == i and score == dot(noisy, address)
    matrix = np.stack([a.bipolar() for a in addresses])
    assert list(memory.lookup_rows(matrix)) == list(range(8))


def test_hetero_memory_rejects_duplicates_and_empties(rng):
    a, b = random_hypervectors(2, 64, rng)
    with pytest.raises(DuplicateAddressError):
        HeteroMemory([a, b, a], [{}, {}, {}])
    with pytest.raises(EmptyMemoryError):
        HeteroMemory([], [])


def test_hetero_memory_save_load(tmp_path, rng):
    addresses = random_hypervectors(3, 64, rng)
    memory = HeteroMemory(addresses, [{"write": "1", "move": "L"}, {"write": "2", "move": "R"}, {"write": "0", "move": "L"}])
    path = str(tmp_path / "rules.hdv")
    memory.save(path)
    loaded = HeteroMemory.load(path)
    assert loaded.addresses == memory.addresses
    assert loaded.contents == memory.contents


def test_project_of_a_sum_is_the_sum_of_projections(rng):
    memory = ItemMemory.random(["a", "b", "c", "d"], 1024, rng)
    q1 = bundle([memory.vector("a"), memory.vector("b"), random_hypervectors(1, 1024, rng.split(1))[0]])
    q2 = bundle([memory.vector("c"), memory.vector("c"), memory.vector("d")])
    assert memory.project(q1 + q2) == memory.project(q1) + memory.project(q2)


def test_cleanup_commutes_with_rotation(rng):
    memory = ItemMemory.random([f"x{i}" for i in range(20)], 1024, rng)
    for k in [1, 7, -5]:
        rotated = memory.permuted(k)
        for i, (name, vector) in enumerate(memory):
            query = flip_noise(vector, 0.25, rng.split(i, k % 1024))
            direct = memory.cleanup(query)
            moved = rotated.cleanup(permute(query, k))
            assert moved.name == direct.name == name
            assert moved.score == direct.score
            assert moved.vector == permute(direct.vector, k)


def test_exact_ties_resolve_to_the_first_entry():
    a = Hypervector.from_bipolar([1, 1, 1, 1])
    b = Hypervector.from_bipolar([1, 1, -1, -1])
    c = Hypervector.from_bipolar([1, -1, 1, -1])
    zero = Accumulator.zeros(4)
    assert ItemMemory(["a", "b", "c"], [a, b, c]).cleanup(zero).name == "a"
    assert ItemMemory(["c", "b", "a"], [c, b, a]).cleanup(zero).name == "c"
    # every entry scores 0 against a zero accumulator
    assert [m.score for m in ItemMemory(["a", "b", "c"], [a, b, c]).rank(zero)] == [0, 0, 0]
    hetero = HeteroMemory([b, c], [{"row": "first"}, {"row": "second"}])
    assert hetero.lookup(zero) == {"row": "first"}


@pytest.mark.parametrize("index", ["-1", "3", "7"])
def test_hetero_memory_load_rejects_out_of_range_rows(tmp_path, rng, index):
    addresses = random_hypervectors(3, 64, rng)
    memory = HeteroMemory(addresses, [{"write": "1"}, {"write": "2"}, {"write": "0"}])
    path = str(tmp_path / "rules.hdv")
    memory.save(path)
    with open(path + ".payload.tsv", "a", encoding="utf-8") as f:
        f.write(f"{index}\t9\n")
    with pytest.raises(CodebookFormatError, match="line 5"):
        HeteroMemory.load(path)
