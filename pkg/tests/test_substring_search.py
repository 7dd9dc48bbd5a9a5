import os

import numpy as np
import pytest

from hypervectors import HDCError, Rng, UnknownSymbolError, as_generator, bind, bundle, permute
from substring_search import (
    DEFAULT_ALPHABET,
    VARIANT_CLEANUP,
    VARIANT_ORIGINAL,
    build_string_automaton,
    calibrate_threshold,
    naive_find,
    query_cleanup,
    query_original,
    random_absent_query,
    read_batch,
    run_query,
)


def test_automaton_shape(rng):
    sa = build_string_automaton("hello", 1024, rng)
    assert sa.base_len == 5
    assert len(sa.state_mem) == 6
    assert sa.state_mem.names[0] == "s0" and sa.state_mem.names[-1] == "s5"
    assert sa.sym_cb.names[:26] == DEFAULT_ALPHABET
    assert sa.beta.weight == 5


def test_single_symbol_base_is_one_transition(rng):
    sa = build_string_automaton("q", 512, rng)
    s0, s1 = sa.state_mem.vectors
    expected = bundle([bind(s0, bind(sa.sym_cb.vector("q"), permute(s1, 1)))])
    assert sa.beta == expected


def test_extra_base_symbols_join_the_alphabet(rng):
    sa = build_string_automaton("ab-c", 256, rng)
    assert "-" in sa.sym_cb
    custom = build_string_automaton("abc", 256, rng, alphabet=["a", "b", "c"])
    assert len(custom.sym_cb) == 3


def test_cleanup_variant_finds_hello(rng):
    sa = build_string_automaton("hello", 8192, Rng(7))
    outcome = query_cleanup(sa, "ell")
    assert outcome.present
    assert outcome.positions == (4,)
    assert outcome.steps == outcome.projections == 3
    assert outcome.state_weights.shape == (3, 6)
    absent = query_cleanup(sa, "lxo")
    assert not absent.present and absent.positions == ()


def test_cleanup_variant_reports_every_occurrence():
    sa = build_string_automaton("abracadabra", 8192, Rng(3))
    assert query_cleanup(sa, "abra").positions == tuple(naive_find("abracadabra", "abra")) == (4, 11)
    assert query_cleanup(sa, "a").positions == (1, 4, 6, 8, 11)


def test_original_variant_agrees_on_hello():
    sa = build_string_automaton("hello", 1 << 16, Rng(7))
    present = query_original(sa, "ell")
    assert present.present and present.positions == () and present.projections == 0
    assert not query_original(sa, "lxo").present


def test_cleanup_agrees_with_naive_oracle_on_random_pairs():
    rng = Rng(2718)
    generator = as_generator(rng.split(0))
    agreements = 0
    trials = 100
    for trial in range(trials):
        base = "".join(DEFAULT_ALPHABET[i] for i in generator.integers(26, size=48))
        length = int(generator.integers(3, 13))
        if trial % 2 == 0:
            start = int(generator.integers(len(base) - length + 1))
            query = base[start:start + length]
        else:
            query = "".join(DEFAULT_ALPHABET[i] for i in generator.integers(26, size=length))
        sa = build_string_automaton(base, 1 << 14, rng.split(1, trial))
        outcome = query_cleanup(sa, query)
        expected = naive_find(base, query)
        if outcome.present == bool(expected):
            agreements += 1
            assert list(outcome.positions) == expected
    assert agreements >= 97


def test_run_query_dispatch_and_errors(rng):
    sa = build_string_automaton("hello", 512, rng)
    assert run_query(sa, "he", variant=VARIANT_CLEANUP).steps == 2
    assert run_query(sa, "he", variant=VARIANT_ORIGINAL).projections == 0
    with pytest.raises(HDCError):
        run_query(sa, "he", variant="exact")
    with pytest.raises(HDCError):
        run_query(sa, "")
    with pytest.raises(UnknownSymbolError):
        run_query(sa, "HE")
    with pytest.raises(HDCError):
        build_string_automaton("", 512, rng)
    with pytest.raises(HDCError):
        query_cleanup(sa, "he", unit=0)


def test_naive_find():
    assert naive_find("mississippi", "ssi") == [5, 8]
    assert naive_find("abc", "abcd") == []
    with pytest.raises(HDCError):
        naive_find("abc", "")


def test_random_absent_query(rng):
    sa = build_string_automaton("abcabc", 256, rng)
    generator = as_generator(rng.split(5))
    for _ in range(20):
        query = random_absent_query(sa, 3, generator)
        assert len(query) == 3 and not naive_find(sa.base, query)
    tiny = build_string_automaton("ab", 256, rng, alphabet=["a", "b"])
    with pytest.raises(HDCError):
        random_absent_query(tiny, 1, generator)


def test_calibrate_threshold(rng):
    sa = build_string_automaton("hello", 4096, rng)
    threshold = calibrate_threshold(sa, rng.split(1), trials=100, query_len=3)
    assert 0 < threshold <= sa.dim
    assert query_cleanup(sa, "ell", threshold=threshold).present
    with pytest.raises(HDCError):
        calibrate_threshold(sa, rng, trials=10)


def test_read_batch_and_agreement(test_data_dir):
    batch = read_batch(os.path.join(test_data_dir, "search_batch.tsv"))
    assert len(batch) == 6
    assert batch[0].base == "hello" and batch[0].query == "ell" and batch[0].expected is True
    assert batch[1].expected is False
    rng = Rng(11)
    for i, item in enumerate(batch):
        sa = build_string_automaton(item.base, 8192, rng.split(i))
        assert query_cleanup(sa, item.query).present == item.expected


def test_read_batch_rejects_bad_rows(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("hello\tell\tmaybe\n", encoding="utf-8")
    with pytest.raises(HDCError):
        read_batch(str(path))
    path.write_text("# only a comment\nhello\n", encoding="utf-8")
    with pytest.raises(HDCError):
        read_batch(str(path))
    path.write_text("hello\tell\n\n", encoding="utf-8")
    assert read_batch(str(path))[0].expected is None


def test_weights_are_read_only(rng):
    outcome = query_cleanup(build_string_automaton("hello", 512, rng), "l")
    assert isinstance(outcome.state_weights, np.ndarray)
    with pytest.raises(ValueError):
        outcome.state_weights[0, 0] = 1
