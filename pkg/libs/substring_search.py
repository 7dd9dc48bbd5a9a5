"""
Substring Search Module

Searches for a query substring inside a base string by running a
nondeterministic automaton in superposition. Every position of the base
string is a state s_0..s_n; the automaton vector holds the transition
s_{i-1} --b_i--> s_i for every base symbol b_i:

    beta = sum_i s_{i-1} * b_i * permute(s_i, 1)

Starting from the superposition of all states, every query symbol q_j
advances the generalized state:

    p_j = permute(p_{j-1} * beta * q_j, -1)

The original variant keeps the raw recurrence. The clean-up variant
projects p_j back onto the state memory after every step, which keeps the
noise from compounding and lets the final state weights name the
positions where the match ends.
"""

import csv
import logging
import string
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from hypervectors import (
    Accumulator,
    HDCError,
    RandomSource,
    Rng,
    as_generator,
    bind,
    bundle,
    permute,
)
from item_memory import ItemMemory, SymbolCodebook, round_divide

logger = logging.getLogger(__name__)

VARIANT_ORIGINAL = "original"
VARIANT_CLEANUP = "cleanup"
VARIANTS = (VARIANT_ORIGINAL, VARIANT_CLEANUP)

DEFAULT_ALPHABET = tuple(string.ascii_lowercase)
DEFAULT_THRESHOLD_FRACTION = 0.5
MIN_CALIBRATION_TRIALS = 100
DEFAULT_CALIBRATION_PERCENTILE = 99.9

# Fixed-point unit of an active state's weight between clean-up steps.
CLEANUP_WEIGHT_UNIT = 256

# Attempts at drawing a query absent from the base before giving up.
_MAX_NEGATIVE_DRAWS = 100

Symbols = Union[str, Sequence[str]]


@dataclass(frozen=True)
class StringAutomaton:
    beta: Accumulator
    state_mem: ItemMemory
    sym_cb: SymbolCodebook
    base: Tuple[str, ...]

    @property
    def base_len(self) -> int:
        return len(self.base)

    @property
    def dim(self) -> int:
        return self.beta.dim


@dataclass(frozen=True)
class QueryOutcome:
    """
    Result of one substring query.

    positions are 1-based end indices into the base string (clean-up
    variant only). state_weights has one row per query step and one
    column per state.
    """

    present: bool
    score: int
    positions: Tuple[int, ...] = ()
    state_weights: Optional[np.ndarray] = None
    steps: int = 0
    projections: int = 0


class BatchQuery(NamedTuple):
    base: str
    query: str
    expected: Optional[bool]


def _symbols(seq: Symbols) -> Tuple[str, ...]:
    return tuple(seq)


def state_names(n: int) -> List[str]:
    return [f"s{i}" for i in range(n + 1)]


def build_string_automaton(
    base: Symbols,
    dim: int,
    rng: Rng,
    alphabet: Optional[Sequence[str]] = None,
) -> StringAutomaton:
    """
    Build the automaton vector of a base string.

    Args:
        base: Non-empty symbol sequence (a str is split into characters)
        dim: Hypervector dimension
        rng: Master random source; states come from rng.split(0), symbols from rng.split(1)
        alphabet: Query alphabet; defaults to a-z plus any other base symbols

    Returns:
        StringAutomaton with n + 1 state vectors
    """
    base = _symbols(base)
    if not base:
        raise HDCError("The base string must not be empty")
    if alphabet is None:
        alphabet = list(DEFAULT_ALPHABET)
        for symbol in base:
            if symbol not in alphabet:
                alphabet.append(symbol)
    state_mem = ItemMemory.random(state_names(len(base)), dim, rng.split(0))
    sym_cb = ItemMemory.random(alphabet, dim, rng.split(1))
    states = state_mem.vectors
    beta = bundle(
        (
            bind(states[i - 1], bind(sym_cb.vector(symbol), permute(states[i], 1)))
            for i, symbol in enumerate(base, start=1)
        ),
        dim=dim,
    )
    logger.debug("Built string automaton for base of length %d at dim %d", len(base), dim)
    return StringAutomaton(beta, state_mem, sym_cb, base)


def default_threshold(dim: int) -> int:
    return int(dim * DEFAULT_THRESHOLD_FRACTION)


def _advance(sa: StringAutomaton, p: Accumulator, symbol: str) -> Accumulator:
    return permute(bind(bind(p, sa.beta), sa.sym_cb.vector(symbol)), -1)


def _initial_state(sa: StringAutomaton, unit: int = 1) -> Accumulator:
    return sa.state_mem.combine(np.full(len(sa.state_mem), unit, dtype=np.int64))


def _check_query(sa: StringAutomaton, query: Tuple[str, ...]) -> None:
    if not query:
        raise HDCError("The query must not be empty")
    for symbol in query:
        sa.sym_cb.index(symbol)


def query_original(sa: StringAutomaton, query: Symbols, threshold: Optional[int] = None) -> QueryOutcome:
    """
    Run the raw recurrence and test the final generalized state against every state.

    Raises:
        UnknownSymbolError: if a query symbol is not in the alphabet
        AccumulatorOverflowError: if the unnormalized recurrence outgrows int64
    """
    query = _symbols(query)
    _check_query(sa, query)
    if threshold is None:
        threshold = default_threshold(sa.dim)
    p = _initial_state(sa)
    for symbol in query:
        p = _advance(sa, p, symbol)
    scores = sa.state_mem.similarities(p)
    score = int(scores.max())
    return QueryOutcome(
        present=score >= threshold,
        score=score,
        steps=len(query),
        projections=0,
    )


def query_cleanup(
    sa: StringAutomaton,
    query: Symbols,
    threshold: Optional[int] = None,
    unit: int = CLEANUP_WEIGHT_UNIT,
) -> QueryOutcome:
    """
    Run the recurrence with a projection onto the state memory after every step.

    The generalized state is kept in fixed point: an active state carries
    weight `unit`, so every projection weight is divided by N (rounded half
    away from zero) before recombination. Recorded state weights are on
    the N scale. Raw projections grow by a factor N per step and would
    overflow int64, so a projection weight below about N/(2 * unit) rounds
    to zero. Every state s_k (k >= 1) whose final weight reaches the
    threshold marks a match ending at base index k.

    Args:
        sa: String automaton
        query: Query symbols
        threshold: Detection threshold on the N scale (default N/2)
        unit: Fixed-point weight of one active state; 1 rounds every
            projection weight to a whole state

    Returns:
        QueryOutcome with positions and the per-step state weights
    """
    query = _symbols(query)
    _check_query(sa, query)
    if threshold is None:
        threshold = default_threshold(sa.dim)
    if unit < 1:
        raise HDCError(f"Weight unit must be a positive integer, got {unit}")
    p = _initial_state(sa, unit)
    weights = np.empty((len(query), len(sa.state_mem)), dtype=np.int64)
    for j, symbol in enumerate(query):
        p = _advance(sa, p, symbol)
        raw = sa.state_mem.similarities(p)
        weights[j] = round_divide(raw, unit)
        p = sa.state_mem.combine(round_divide(raw, sa.dim))
    final = weights[-1]
    positions = tuple(int(k) for k in np.flatnonzero(final[1:] >= threshold) + 1)
    weights.setflags(write=False)
    return QueryOutcome(
        present=bool(positions),
        score=int(final[1:].max()),
        positions=positions,
        state_weights=weights,
        steps=len(query),
        projections=len(query),
    )


def run_query(sa: StringAutomaton, query: Symbols, threshold: Optional[int] = None, variant: str = VARIANT_CLEANUP) -> QueryOutcome:
    if variant == VARIANT_ORIGINAL:
        return query_original(sa, query, threshold)
    if variant == VARIANT_CLEANUP:
        return query_cleanup(sa, query, threshold)
    raise HDCError(f"Unknown search variant '{variant}' (expected one of {list(VARIANTS)})")


def naive_find(base: Symbols, query: Symbols) -> List[int]:
    """1-based end indices of every occurrence of query in base."""
    base = _symbols(base)
    query = _symbols(query)
    if not query:
        raise HDCError("The query must not be empty")
    m = len(query)
    return [end for end in range(m, len(base) + 1) if base[end - m:end] == query]


def random_absent_query(sa: StringAutomaton, length: int, rng: RandomSource) -> Tuple[str, ...]:
    """Draw a uniform random query over the alphabet that does not occur in the base."""
    generator = as_generator(rng)
    alphabet = sa.sym_cb.names
    for _ in range(_MAX_NEGATIVE_DRAWS):
        query = tuple(alphabet[int(i)] for i in generator.integers(len(alphabet), size=length))
        if not naive_find(sa.base, query):
            return query
    raise HDCError(f"Could not draw a query of length {length} absent from the base")


def calibrate_threshold(
    sa: StringAutomaton,
    rng: Rng,
    trials: int = 1000,
    variant: str = VARIANT_CLEANUP,
    query_len: int = 5,
    percentile: float = DEFAULT_CALIBRATION_PERCENTILE,
) -> int:
    """
    Estimate a detection threshold from queries known to be absent.

    Args:
        sa: String automaton to calibrate
        rng: Random source for the negative queries
        trials: Number of negative queries (at least 100)
        variant: Which recurrence to calibrate
        query_len: Length of the negative queries
        percentile: Percentile of the negative scores taken as the noise ceiling

    Returns:
        Midpoint between the noise ceiling and N
    """
    if trials < MIN_CALIBRATION_TRIALS:
        raise HDCError(f"Calibration needs at least {MIN_CALIBRATION_TRIALS} trials, got {trials}")
    generator = as_generator(rng)
    scores = np.empty(trials, dtype=np.float64)
    for t in range(trials):
        query = random_absent_query(sa, query_len, generator)
        scores[t] = run_query(sa, query, variant=variant).score
    ceiling = float(np.percentile(scores, percentile))
    threshold = int(round((ceiling + sa.dim) / 2))
    logger.info(
        "Calibrated %s threshold %d from %d negatives (%.1fth percentile %.1f)",
        variant, threshold, trials, percentile, ceiling,
    )
    return threshold


def read_batch(path: str) -> List[BatchQuery]:
    """
    Read a tab-separated batch of (base, query[, expected]) rows.

    Blank lines and lines starting with '#' are skipped. expected is
    1/0/true/false or empty.
    """
    truthy = {"1", "true", "yes", "present"}
    falsy = {"0", "false", "no", "absent"}
    batch = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        for line_no, row in enumerate(csv.reader(f, delimiter="\t"), start=1):
            if not row or not row[0].strip() or row[0].startswith("#"):
                continue
            if len(row) < 2:
                raise HDCError(f"{path}:{line_no}: expected base<TAB>query[<TAB>expected]")
            expected = None
            if len(row) > 2 and row[2].strip():
                flag = row[2].strip().lower()
                if flag in truthy:
                    expected = True
                elif flag in falsy:
                    expected = False
                else:
                    raise HDCError(f"{path}:{line_no}: cannot read expected value '{row[2]}'")
            batch.append(BatchQuery(row[0], row[1], expected))
    return batch
