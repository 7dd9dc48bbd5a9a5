"""
Data Structure Encoders Module

This module maps symbolic data structures onto hypervectors and provides
the matching query/decode procedures:

1. Sets, multisets (histograms) and cross products of sets
2. Sequences (sum and product forms), position probes, replacement, concatenation
3. n-gram statistics
4. Undirected and directed graphs
5. Binary trees addressed by left/right role traces
6. Stacks
7. Deterministic and nondeterministic finite-state automata

Sequence convention: the last element of a length-k sequence carries
permutation power 0, element i (1-based) carries power k - i.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from hypervectors import (
    Accumulator,
    DimensionMismatchError,
    EmptyStackError,
    HDCError,
    Hypervector,
    RandomSource,
    UnknownSymbolError,
    VectorLike,
    as_generator,
    bind,
    bind_all,
    bundle,
    dot,
    permute,
)
from item_memory import ItemMemory, Match, SymbolCodebook
import tables.behaviour_tables as behaviour_tables

logger = logging.getLogger(__name__)

# Power carried by the last element of an encoded sequence.
LAST_ELEMENT_POWER = 0

# Membership / presence threshold as a fraction of N.
DEFAULT_THRESHOLD_FRACTION = 0.5

ROLE_LEFT = "l"
ROLE_RIGHT = "r"
ROLE_NAMES = (ROLE_LEFT, ROLE_RIGHT)


def default_threshold(dim: int) -> int:
    """Midpoint between the signal expectation N and the noise expectation 0."""
    return int(dim * DEFAULT_THRESHOLD_FRACTION)


def _as_accumulator(x: VectorLike) -> Accumulator:
    return x if isinstance(x, Accumulator) else Accumulator.from_hypervector(x)


def sequence_power(i: int, k: int) -> int:
    """Permutation power of 1-based position i in a length-k sequence."""
    return k - i + LAST_ELEMENT_POWER


# ---------------------------------------------------------------------------
# Sets and multisets
# ---------------------------------------------------------------------------

def encode_set(cb: SymbolCodebook, members: Sequence[str]) -> Accumulator:
    """
    Superpose the member vectors of a set.

    Raises:
        UnknownSymbolError: if a member is not in the codebook
        HDCError: if a member is listed twice
    """
    if len(set(members)) != len(members):
        raise HDCError(f"Set members must be unique: {list(members)}")
    return bundle((cb.vector(name) for name in members), dim=cb.dim)


def is_member(set_acc: VectorLike, cb: SymbolCodebook, name: str, threshold: Optional[int] = None) -> bool:
    if threshold is None:
        threshold = default_threshold(cb.dim)
    return dot(set_acc, cb.vector(name)) >= threshold


def encode_multiset(cb: SymbolCodebook, counts: Mapping[str, int]) -> Accumulator:
    """
    Encode a multiset (histogram) as sum_k count_k * v_k.

    Args:
        cb: Symbol codebook
        counts: Mapping from symbol name to a non-negative count

    Returns:
        The exact Accumulator
    """
    weights = np.zeros(len(cb), dtype=np.int64)
    for name, count in counts.items():
        if count < 0:
            raise HDCError(f"Count for '{name}' must be non-negative, got {count}")
        weights[cb.index(name)] += int(count)
    return cb.combine(weights)


def decode_histogram(v: VectorLike, cb: SymbolCodebook) -> Dict[str, float]:
    """
    Estimate every symbol's frequency as its dot product with v.

    The estimates are unscaled; any affine calibration is up to the caller.
    """
    scores = cb.similarities(v)
    return {name: float(score) for name, score in zip(cb.names, scores)}


def decode_multiset_counts(acc: Accumulator, cb: SymbolCodebook) -> Dict[str, int]:
    """
    Read counts back from an exact multiset accumulator.

    dot(acc, v_k) / N is an unbiased estimate of count_k; estimates are
    rounded to the nearest non-negative integer.
    """
    estimates = cb.similarities(acc) / cb.dim
    counts = np.clip(np.rint(estimates), 0, None).astype(np.int64)
    return {name: int(count) for name, count in zip(cb.names, counts)}


def cross_product(set_a: Accumulator, set_b: Accumulator) -> Accumulator:
    """
    Bind every element of one set with every element of another.

    For exact set sums the component-wise product equals the sum of all
    pairwise binds.
    """
    return _as_accumulator(set_a).multiply(_as_accumulator(set_b))


# ---------------------------------------------------------------------------
# Sequences
# ---------------------------------------------------------------------------

def encode_sequence_sum(cb: SymbolCodebook, seq: Sequence[str]) -> Accumulator:
    """Encode a sequence as sum_i permute(v_i, k - i)."""
    k = len(seq)
    return bundle(
        (permute(cb.vector(name), sequence_power(i, k)) for i, name in enumerate(seq, start=1)),
        dim=cb.dim,
    )


def encode_sequence_product(cb: SymbolCodebook, seq: Sequence[str]) -> Hypervector:
    """Encode a sequence as the bind of permute(v_i, k - i); the empty sequence is the bind identity."""
    k = len(seq)
    if k == 0:
        return Hypervector.ones(cb.dim)
    return bind_all(*(permute(cb.vector(name), sequence_power(i, k)) for i, name in enumerate(seq, start=1)))


def sequence_similarity(seq_a: VectorLike, seq_b: VectorLike) -> int:
    return dot(seq_a, seq_b)


def probe_position(seq: VectorLike, i: int, k: int, cb: SymbolCodebook) -> str:
    """
    Recover the symbol at 1-based position i of a length-k sum-encoded sequence.
    """
    if not 1 <= i <= k:
        raise HDCError(f"Position {i} outside sequence of length {k}")
    return cb.cleanup(permute(seq, -sequence_power(i, k))).name


def replace_at(
    seq: VectorLike,
    i: int,
    old: str,
    new: str,
    k: int,
    cb: SymbolCodebook,
    variant: str = "sum",
) -> VectorLike:
    """
    Replace the symbol at position i without re-encoding the whole sequence.

    Args:
        seq: Encoded sequence (Accumulator for "sum", Hypervector for "product")
        i: 1-based position holding `old`
        old: Symbol currently at position i (caller-asserted)
        new: Replacement symbol
        k: Sequence length
        cb: Symbol codebook
        variant: "sum" or "product"

    Returns:
        The updated encoding, same type as the variant produces
    """
    if not 1 <= i <= k:
        raise HDCError(f"Position {i} outside sequence of length {k}")
    power = sequence_power(i, k)
    old_vector = permute(cb.vector(old), power)
    new_vector = permute(cb.vector(new), power)
    if variant == "sum":
        return _as_accumulator(seq) - old_vector + new_vector
    if variant == "product":
        if not isinstance(seq, Hypervector):
            raise HDCError("The product variant operates on a Hypervector")
        return bind(bind(seq, old_vector), new_vector)
    raise HDCError(f"Unknown sequence variant '{variant}'")


def shift_and_concat(seq1: VectorLike, seq2: Sequence[str], len2: int, cb: SymbolCodebook) -> Accumulator:
    """Append seq2 to an encoded sequence: permute(seq1, len2) + encoding of seq2."""
    if len2 != len(seq2):
        raise HDCError(f"Suffix length {len2} does not match {len(seq2)} symbols")
    if seq1.dim != cb.dim:
        raise DimensionMismatchError(f"Sequence dimension {seq1.dim} != codebook dimension {cb.dim}")
    return _as_accumulator(permute(seq1, len2)) + encode_sequence_sum(cb, seq2)


def encode_ngram_stats(cb: SymbolCodebook, text: Sequence[str], n: int) -> Accumulator:
    """
    Superpose the product encodings of all contiguous n-gram windows (stride 1).
    """
    if n < 1:
        raise HDCError(f"n must be at least 1, got {n}")
    if len(text) < n:
        raise HDCError(f"Text of length {len(text)} is shorter than n={n}")
    return bundle(
        (encode_sequence_product(cb, text[start:start + n]) for start in range(len(text) - n + 1)),
        dim=cb.dim,
    )


# ---------------------------------------------------------------------------
# Graphs
# ---------------------------------------------------------------------------

def edge_vector(cb: SymbolCodebook, u: str, v: str, directed: bool = False) -> Hypervector:
    if directed:
        return bind(cb.vector(u), permute(cb.vector(v), 1))
    return bind(cb.vector(u), cb.vector(v))


def encode_graph(cb: SymbolCodebook, edges: Sequence[Tuple[str, str]], directed: bool = False) -> Accumulator:
    """
    Superpose the edge vectors of a graph.

    Isolated vertices are not represented; see encode_vertex_set.
    """
    return bundle((edge_vector(cb, u, v, directed) for u, v in edges), dim=cb.dim)


def encode_vertex_set(cb: SymbolCodebook, vertices: Sequence[str]) -> Accumulator:
    return encode_set(cb, vertices)


def edge_query(g: VectorLike, u: str, v: str, directed: bool, cb: SymbolCodebook) -> int:
    """Score of edge (u, v) in the graph; the caller applies the threshold."""
    return dot(g, edge_vector(cb, u, v, directed))


def has_edge(
    g: VectorLike,
    u: str,
    v: str,
    cb: SymbolCodebook,
    directed: bool = False,
    threshold: Optional[int] = None,
) -> bool:
    if threshold is None:
        threshold = default_threshold(cb.dim)
    return edge_query(g, u, v, directed, cb) >= threshold


def graph_neighbors(g: VectorLike, vertex: str, cb: SymbolCodebook, k: int = 2, directed: bool = False) -> List[Match]:
    """
    Top-k clean-up of the vertices joined to `vertex`.

    For directed graphs the successors are returned.
    """
    query = bind(g, cb.vector(vertex))
    if directed:
        query = permute(query, -1)
    return cb.rank(query, k)


def graph_similarity(g1: VectorLike, g2: VectorLike) -> int:
    """Dot of two graph encodings; its expectation is N times the shared edge count."""
    return dot(g1, g2)


# ---------------------------------------------------------------------------
# Binary trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TreePath:
    """Trace from the root to a leaf; roles[d] is the branch taken at depth d."""

    roles: Tuple[str, ...]

    def __post_init__(self):
        roles = tuple(self.roles)
        if not roles:
            raise HDCError("A tree path needs at least one step")
        for role in roles:
            if role not in ROLE_NAMES:
                raise HDCError(f"Tree path roles must be '{ROLE_LEFT}' or '{ROLE_RIGHT}', got '{role}'")
        object.__setattr__(self, "roles", roles)

    @classmethod
    def parse(cls, text: str) -> "TreePath":
        """Parse 'rrl', 'r,r,l' or 'right,right,left'."""
        text = text.strip().lower()
        if "," in text:
            tokens = [token.strip() for token in text.split(",")]
        else:
            tokens = list(text)
        mapping = {"l": ROLE_LEFT, "left": ROLE_LEFT, "r": ROLE_RIGHT, "right": ROLE_RIGHT}
        try:
            return cls(tuple(mapping[token] for token in tokens))
        except KeyError as e:
            raise HDCError(f"Unknown tree role {e.args[0]!r} in path '{text}'") from None

    @property
    def steps(self) -> List[Tuple[int, str]]:
        return list(enumerate(self.roles))

    def __len__(self) -> int:
        return len(self.roles)

    def __str__(self) -> str:
        return "".join(self.roles)


def path_vector(path: TreePath, role_cb: SymbolCodebook) -> Hypervector:
    """Bind of permute(role vector at depth d, d) over the path."""
    return bind_all(*(permute(role_cb.vector(role), depth) for depth, role in path.steps))


def encode_binary_tree(
    role_cb: SymbolCodebook,
    leaf_cb: SymbolCodebook,
    leaves: Sequence[Tuple[TreePath, str]],
) -> Accumulator:
    """
    Encode a binary tree as the sum of leaf symbols bound to their path vectors.

    Raises:
        HDCError: if two leaves share a path
    """
    paths = [path for path, _ in leaves]
    if len(set(paths)) != len(paths):
        raise HDCError("Every tree path may hold only one symbol")
    return bundle(
        (bind(leaf_cb.vector(name), path_vector(path, role_cb)) for path, name in leaves),
        dim=leaf_cb.dim,
    )


def tree_leaf_lookup(t: VectorLike, path: TreePath, role_cb: SymbolCodebook, leaf_cb: SymbolCodebook) -> str:
    return leaf_cb.cleanup(bind(t, path_vector(path, role_cb))).name


def make_role_codebook(dim: int, rng: RandomSource) -> ItemMemory:
    return ItemMemory.random(ROLE_NAMES, dim, rng)


# ---------------------------------------------------------------------------
# Stacks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StackState:
    """Unnormalized stack: acc = sum_k permute(v_k, k), top element at power 0."""

    acc: Accumulator
    depth: int = 0

    @classmethod
    def empty(cls, dim: int) -> "StackState":
        return cls(Accumulator.zeros(dim), 0)


def stack_push(st: StackState, sym: str, cb: SymbolCodebook) -> StackState:
    return StackState(permute(st.acc, 1) + cb.vector(sym), st.depth + 1)


def stack_pop(st: StackState, cb: SymbolCodebook) -> Tuple[str, StackState]:
    """
    Pop the top symbol.

    Returns:
        Tuple of (top symbol name, remaining stack)

    Raises:
        EmptyStackError: if the stack is empty
    """
    if st.depth < 1:
        raise EmptyStackError("Cannot pop from an empty stack")
    top = cb.cleanup(st.acc)
    return top.name, StackState(permute(st.acc - top.vector, -1), st.depth - 1)


# ---------------------------------------------------------------------------
# Finite-state automata
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FsaDescriptor:
    states: Tuple[str, ...]
    symbols: Tuple[str, ...]
    transitions: Tuple[Tuple[str, str, str], ...]
    start: str
    accepting: FrozenSet[str] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "symbols", tuple(self.symbols))
        object.__setattr__(self, "transitions", tuple(tuple(t) for t in self.transitions))
        object.__setattr__(self, "accepting", frozenset(self.accepting))
        known_states = set(self.states)
        known_symbols = set(self.symbols)
        if self.start not in known_states:
            raise UnknownSymbolError(f"Unknown start state '{self.start}'")
        for state in self.accepting:
            if state not in known_states:
                raise UnknownSymbolError(f"Unknown accepting state '{state}'")
        for source, symbol, target in self.transitions:
            if source not in known_states or target not in known_states:
                raise UnknownSymbolError(f"Transition {source} -{symbol}-> {target} uses an unknown state")
            if symbol not in known_symbols:
                raise UnknownSymbolError(f"Transition {source} -{symbol}-> {target} uses an unknown symbol")

    @property
    def is_deterministic(self) -> bool:
        keys = [(source, symbol) for source, symbol, _ in self.transitions]
        return len(keys) == len(set(keys))

    def transition_table(self) -> Dict[Tuple[str, str], str]:
        """(state, symbol) -> next state; only valid for deterministic automata."""
        if not self.is_deterministic:
            raise HDCError("Transition table requested for a nondeterministic automaton")
        return {(source, symbol): target for source, symbol, target in self.transitions}


def turnstile() -> FsaDescriptor:
    """The coin-operated turnstile: token unlocks, push locks."""
    return load_fsa(behaviour_tables.TURNSTILE)


def load_fsa(text: str) -> FsaDescriptor:
    """
    Parse an automaton from delimited text.

    Each data row is state<TAB>symbol<TAB>next. A comment line of the form
    `# start=<state> accepting=<s1>,<s2>` sets the start and accepting
    states; otherwise the first state listed is the start state. States and
    symbols keep their order of first appearance.
    """
    start = None
    accepting: Tuple[str, ...] = ()
    states: List[str] = []
    symbols: List[str] = []
    transitions = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for token in line[1:].split():
                key, sep, value = token.partition("=")
                if sep and key == "start":
                    start = value
                elif sep and key == "accepting":
                    accepting = tuple(name for name in value.split(",") if name)
            continue
        fields = [field.strip() for field in line.split("\t")]
        if len(fields) != 3:
            raise HDCError(f"Line {line_no}: expected state<TAB>symbol<TAB>next, got {line!r}")
        source, symbol, target = fields
        for state in (source, target):
            if state not in states:
                states.append(state)
        if symbol not in symbols:
            symbols.append(symbol)
        transitions.append((source, symbol, target))
    if not transitions:
        raise HDCError("Automaton table has no transitions")
    return FsaDescriptor(
        states=tuple(states),
        symbols=tuple(symbols),
        transitions=tuple(transitions),
        start=start if start is not None else states[0],
        accepting=frozenset(accepting),
    )


def random_fsa(n_states: int, n_symbols: int, out_degree: int, rng: RandomSource) -> FsaDescriptor:
    """
    Random deterministic automaton: every state gets out_degree transitions
    on distinct random symbols to random target states.
    """
    if not 1 <= out_degree <= n_symbols:
        raise HDCError(f"out_degree must lie in [1, {n_symbols}], got {out_degree}")
    generator = as_generator(rng)
    states = tuple(f"s{i}" for i in range(n_states))
    symbols = tuple(f"x{i}" for i in range(n_symbols))
    transitions = []
    for state in states:
        for symbol_index in generator.choice(n_symbols, size=out_degree, replace=False):
            target = states[int(generator.integers(n_states))]
            transitions.append((state, symbols[int(symbol_index)], target))
    return FsaDescriptor(states, symbols, tuple(transitions), start=states[0])


def transition_vector(source: Hypervector, symbol: Hypervector, target: Hypervector) -> Hypervector:
    return bind(symbol, bind(source, permute(target, 1)))


def fsa_encode(desc: FsaDescriptor, state_cb: SymbolCodebook, sym_cb: SymbolCodebook) -> Accumulator:
    """Superpose bind(symbol, bind(from, permute(to, 1))) over all transitions."""
    return bundle(
        (
            transition_vector(state_cb.vector(source), sym_cb.vector(symbol), state_cb.vector(target))
            for source, symbol, target in desc.transitions
        ),
        dim=state_cb.dim,
    )


def fsa_step(a: VectorLike, state: Hypervector, sym: Hypervector, state_cb: SymbolCodebook) -> Tuple[str, Hypervector]:
    """
    Recall the next state: clean-up of permute(a * sym * state, -1).

    Returns:
        Tuple of (next state name, its seed vector)
    """
    match = state_cb.cleanup(permute(bind(bind(a, sym), state), -1))
    return match.name, match.vector


def nfsa_step(
    a: VectorLike,
    gen_state: Accumulator,
    sym: Hypervector,
    state_cb: SymbolCodebook,
    with_cleanup: bool = False,
) -> Accumulator:
    """
    Advance a generalized state (superposition of active states) by one symbol.
    """
    query = bind(_as_accumulator(bind(a, sym)), gen_state)
    result = permute(query, -1)
    if with_cleanup:
        return state_cb.project(result)
    return result


def fsa_run(
    a: VectorLike,
    desc: FsaDescriptor,
    state_cb: SymbolCodebook,
    sym_cb: SymbolCodebook,
    inputs: Sequence[str],
) -> Tuple[str, bool]:
    """
    Run a deterministic automaton over an input string from its start state.

    Returns:
        Tuple of (final state name, whether it is accepting)
    """
    state_name = desc.start
    state = state_cb.vector(state_name)
    for symbol in inputs:
        state_name, state = fsa_step(a, state, sym_cb.vector(symbol), state_cb)
    return state_name, state_name in desc.accepting
