import os

import pytest

from hypervectors import (
    EmptyStackError,
    HDCError,
    Hypervector,
    UnknownSymbolError,
    bind,
    bundle,
    dot,
    permute,
)
from item_memory import ItemMemory
from encoders import (
    FsaDescriptor,
    StackState,
    TreePath,
    cross_product,
    decode_histogram,
    decode_multiset_counts,
    edge_query,
    encode_binary_tree,
    encode_graph,
    encode_multiset,
    encode_ngram_stats,
    encode_sequence_product,
    encode_sequence_sum,
    encode_set,
    encode_vertex_set,
    fsa_encode,
    fsa_run,
    fsa_step,
    graph_neighbors,
    graph_similarity,
    has_edge,
    is_member,
    load_fsa,
    make_role_codebook,
    nfsa_step,
    probe_position,
    random_fsa,
    replace_at,
    shift_and_concat,
    stack_pop,
    stack_push,
    tree_leaf_lookup,
    turnstile,
)

LETTERS = [chr(ord("a") + i) for i in range(20)]


@pytest.fixture
def cb(rng):
    return ItemMemory.random(LETTERS, 4096, rng)


def test_set_membership(cb):
    members = ["a", "c", "f", "k", "q"]
    s = encode_set(cb, members)
    for name in LETTERS:
        assert is_member(s, cb, name) == (name in members)
    with pytest.raises(HDCError):
        encode_set(cb, ["a", "a"])
    with pytest.raises(UnknownSymbolError):
        encode_set(cb, ["zz"])


def test_multiset_counts_and_histogram(rng):
    cb = ItemMemory.random(["a", "b", "c", "d"], 10000, rng)
    counts = {"a": 3, "b": 1, "c": 7}
    acc = encode_multiset(cb, counts)
    assert decode_multiset_counts(acc, cb) == {"a": 3, "b": 1, "c": 7, "d": 0}
    estimates = decode_histogram(acc, cb)
    assert estimates["c"] > estimates["a"] > estimates["b"]
    with pytest.raises(HDCError):
        encode_multiset(cb, {"a": -1})


def test_cross_product_equals_sum_of_pairwise_binds(cb):
    left = ["a", "b", "c"]
    right = ["d", "e"]
    expected = bundle([bind(cb.vector(x), cb.vector(y)) for x in left for y in right])
    assert cross_product(encode_set(cb, left), encode_set(cb, right)) == expected


def test_sequence_probe_positions(cb):
    seq = ["h", "e", "l", "a", "b"]
    acc = encode_sequence_sum(cb, seq)
    for i, name in enumerate(seq, start=1):
        assert probe_position(acc, i, len(seq), cb) == name
    with pytest.raises(HDCError):
        probe_position(acc, 0, len(seq), cb)


def test_replace_matches_reencoding(cb):
    seq = ["a", "b", "c", "d"]
    replaced = ["a", "b", "q", "d"]
    assert replace_at(encode_sequence_sum(cb, seq), 3, "c", "q", 4, cb) == encode_sequence_sum(cb, replaced)
    product = replace_at(encode_sequence_product(cb, seq), 3, "c", "q", 4, cb, variant="product")
    assert product == encode_sequence_product(cb, replaced)
    with pytest.raises(HDCError):
        replace_at(encode_sequence_sum(cb, seq), 3, "c", "q", 4, cb, variant="tensor")


def test_shift_and_concat_matches_encoding_of_concatenation(cb):
    first = ["a", "b", "c"]
    second = ["d", "e"]
    joined = shift_and_concat(encode_sequence_sum(cb, first), second, 2, cb)
    assert joined == encode_sequence_sum(cb, first + second)


def test_empty_product_sequence_is_bind_identity(cb):
    assert encode_sequence_product(cb, []) == Hypervector.ones(cb.dim)


def test_ngram_statistics(rng):
    cb = ItemMemory.random(["a", "b", "c"], 8192, rng)
    stats = encode_ngram_stats(cb, list("abcab"), 2)
    assert dot(stats, encode_sequence_product(cb, ["a", "b"])) > 1.5 * cb.dim
    assert abs(dot(stats, encode_sequence_product(cb, ["b", "a"]))) < 0.5 * cb.dim
    with pytest.raises(HDCError):
        encode_ngram_stats(cb, list("ab"), 3)


def test_undirected_graph(cb):
    g = encode_graph(cb, [("a", "b"), ("b", "c"), ("c", "d")])
    assert has_edge(g, "a", "b", cb)
    assert has_edge(g, "b", "a", cb)
    assert not has_edge(g, "a", "c", cb)
    assert {m.name for m in graph_neighbors(g, "b", cb, k=2)} == {"a", "c"}


def test_directed_graph(cb):
    g = encode_graph(cb, [("a", "b"), ("c", "a")], directed=True)
    assert has_edge(g, "a", "b", cb, directed=True)
    assert not has_edge(g, "b", "a", cb, directed=True)
    assert graph_neighbors(g, "a", cb, k=1, directed=True)[0].name == "b"


def test_graph_similarity_counts_shared_edges(rng):
    cb = ItemMemory.random(LETTERS, 8192, rng)
    g1 = encode_graph(cb, [("a", "b"), ("b", "c"), ("c", "d")])
    g2 = encode_graph(cb, [("a", "b"), ("b", "c"), ("e", "f")])
    assert 1.5 * cb.dim < graph_similarity(g1, g2) < 2.5 * cb.dim
    vertices = encode_vertex_set(cb, ["a", "t"])
    assert is_member(vertices, cb, "t") and not is_member(vertices, cb, "b")


def test_binary_tree_lookup(rng):
    roles = make_role_codebook(4096, rng.split(0))
    leaf_cb = ItemMemory.random(["a", "b", "c", "d"], 4096, rng.split(1))
    leaves = [(TreePath.parse("l"), "a"), (TreePath.parse("rl"), "b"), (TreePath.parse("r,r"), "c")]
    t = encode_binary_tree(roles, leaf_cb, leaves)
    for path, name in leaves:
        assert tree_leaf_lookup(t, path, roles, leaf_cb) == name
    with pytest.raises(HDCError):
        encode_binary_tree(roles, leaf_cb, [(TreePath.parse("l"), "a"), (TreePath.parse("l"), "b")])


def test_tree_path_parsing():
    assert TreePath.parse("right,left") == TreePath(("r", "l"))
    assert str(TreePath.parse("RRL")) == "rrl"
    assert len(TreePath.parse("rrl")) == 3
    with pytest.raises(HDCError):
        TreePath.parse("lx")
    with pytest.raises(HDCError):
        TreePath(())


def test_stack_is_last_in_first_out(cb):
    st = StackState.empty(cb.dim)
    for name in ["a", "b", "c", "d"]:
        st = stack_push(st, name, cb)
    popped = []
    while st.depth:
        name, st = stack_pop(st, cb)
        popped.append(name)
    assert popped == ["d", "c", "b", "a"]
    assert st.acc.is_zero()
    with pytest.raises(EmptyStackError):
        stack_pop(st, cb)


def test_turnstile_recall_and_run(rng):
    desc = turnstile()
    state_cb = ItemMemory.random(desc.states, 4096, rng.split(0))
    sym_cb = ItemMemory.random(desc.symbols, 4096, rng.split(1))
    a = fsa_encode(desc, state_cb, sym_cb)
    for source, symbol, target in desc.transitions:
        name, vector = fsa_step(a, state_cb.vector(source), sym_cb.vector(symbol), state_cb)
        assert name == target and vector == state_cb.vector(target)
    assert fsa_run(a, desc, state_cb, sym_cb, ["token", "push", "token"]) == ("unlocked", True)
    assert fsa_run(a, desc, state_cb, sym_cb, ["token", "push"]) == ("locked", False)


def test_fsa_table_file_matches_builtin(test_data_dir):
    with open(os.path.join(test_data_dir, "turnstile.tsv"), "r", encoding="utf-8") as f:
        loaded = load_fsa(f.read())
    assert loaded == turnstile()
    assert loaded.start == "locked"
    assert loaded.accepting == frozenset({"unlocked"})
    assert loaded.transition_table()[("locked", "token")] == "unlocked"


def test_fsa_descriptor_validation():
    with pytest.raises(UnknownSymbolError):
        FsaDescriptor(("s0",), ("x",), (("s0", "x", "s9"),), start="s0")
    with pytest.raises(UnknownSymbolError):
        FsaDescriptor(("s0",), ("x",), (), start="s1")
    nondeterministic = FsaDescriptor(("s0", "s1"), ("x",), (("s0", "x", "s0"), ("s0", "x", "s1")), start="s0")
    assert not nondeterministic.is_deterministic
    with pytest.raises(HDCError):
        nondeterministic.transition_table()


def test_nondeterministic_step_keeps_all_successors(rng):
    desc = FsaDescriptor(
        ("s0", "s1", "s2", "s3"),
        ("x", "y"),
        (("s0", "x", "s1"), ("s0", "x", "s2"), ("s1", "y", "s3")),
        start="s0",
    )
    state_cb = ItemMemory.random(desc.states, 4096, rng.split(0))
    sym_cb = ItemMemory.random(desc.symbols, 4096, rng.split(1))
    a = fsa_encode(desc, state_cb, sym_cb)
    start = bundle([state_cb.vector("s0")])
    after = nfsa_step(a, start, sym_cb.vector("x"), state_cb)
    scores = dict(zip(state_cb.names, state_cb.similarities(after)))
    assert scores["s1"] > state_cb.dim / 2 and scores["s2"] > state_cb.dim / 2
    assert scores["s0"] < state_cb.dim / 2 and scores["s3"] < state_cb.dim / 2
    cleaned = nfsa_step(a, start, sym_cb.vector("x"), state_cb, with_cleanup=True)
    assert {m.name for m in state_cb.rank(cleaned, k=2)} == {"s1", "s2"}


def test_random_fsa_is_reproducible(rng):
    first = random_fsa(22, 29, 2, rng)
    assert first == random_fsa(22, 29, 2, rng)
    assert len(first.transitions) == 44
    assert first.is_deterministic
    with pytest.raises(HDCError):
        random_fsa(3, 2, 3, rng)


def test_multiset_accumulator_is_exact(cb):
    a, b, c = cb.vector("a"), cb.vector("b"), cb.vector("c")
    acc = encode_multiset(cb, {"a": 3, "b": 2, "c": 1})
    assert acc == bundle([a, a, a, b, b, c])
    assert (acc.components() == 3 * a.bipolar() + 2 * b.bipolar() + c.bipolar()).all()
    assert acc.weight == 6


def test_unigram_statistics_equal_the_multiset(cb):
    assert encode_ngram_stats(cb, list("abcab"), 1) == encode_multiset(cb, {"a": 2, "b": 2, "c": 1})


def test_bigram_statistics_of_abab(cb):
    ab = encode_sequence_product(cb, ["a", "b"])
    ba = encode_sequence_product(cb, ["b", "a"])
    stats = encode_ngram_stats(cb, list("abab"), 2)
    assert stats == bundle([ab, ab, ba])
    assert (stats.components() == 2 * ab.bipolar() + ba.bipolar()).all()


def test_pentagon_graph(cb):
    edges = [("a", "b"), ("a", "e"), ("b", "c"), ("c", "d"), ("d", "e")]
    g = encode_graph(cb, edges)
    assert g == bundle([bind(cb.vector(u), cb.vector(v)) for u, v in edges])
    assert {m.name for m in graph_neighbors(g, "a", cb, k=2)} == {"b", "e"}
    for u, v in edges:
        assert edge_query(g, u, v, False, cb) == edge_query(g, v, u, False, cb)
        assert edge_query(g, u, v, False, cb) >= cb.dim // 2
    for u, v in [("a", "c"), ("a", "d"), ("b", "d"), ("b", "e"), ("c", "e")]:
        assert edge_query(g, u, v, False, cb) < cb.dim // 2


def test_stack_accumulator_after_four_pushes(cb):
    st = StackState.empty(cb.dim)
    for name in ["d", "c", "b", "a"]:
        st = stack_push(st, name, cb)
    expected = bundle([
        cb.vector("a"),
        permute(cb.vector("b"), 1),
        permute(cb.vector("c"), 2),
        permute(cb.vector("d"), 3),
    ])
    assert st.acc == expected
    assert st.depth == 4
    name, rest = stack_pop(st, cb)
    assert name == "a"
    assert rest.acc == bundle([cb.vector("b"), permute(cb.vector("c"), 1), permute(cb.vector("d"), 2)])
