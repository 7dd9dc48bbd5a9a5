"""
Universal Computation Module

Emulates two classic universal systems with hypervectors, each paired with
an exact symbolic oracle:

1. A Turing machine whose behaviour table lives in a heteroassociative
   memory keyed by bind(state, symbol); the tape is a sequence of symbol
   hypervectors and noise can be injected into every read.
2. An elementary cellular automaton whose whole grid is one hypervector
   normalize(sum_j permute(state_j, j)). Each step recovers every cell's
   neighbourhood by unpermuting the grid, looks the next state up in a
   heteroassociative memory and re-superposes the results.

The grid uses a periodic boundary: the left neighbour of cell 1 is cell l
and the right neighbour of cell l is cell 1.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from hypervectors import (
    Accumulator,
    DuplicateAddressError,
    HDCError,
    Hypervector,
    RandomSource,
    Rng,
    UnknownSymbolError,
    as_generator,
    bind,
    bundle,
    flip_noise,
    normalize,
    permute,
)
from item_memory import HeteroMemory, ItemMemory
import tables.behaviour_tables as behaviour_tables

logger = logging.getLogger(__name__)

TM_START_DIM = 16
TM_GROWTH = 1.1
TM_MAX_DIM = 1 << 20
DEFAULT_MAX_ATTEMPTS = 100

MOVES = {"L": -1, "R": 1}

CA_ROLES = ("l", "c", "r")
CA_STATES = ("0", "1")
CA_MIN_LENGTH = 3
BOUNDARY_PERIODIC = "periodic"

# Upper bound on rolled-matrix elements materialised per chunk of cells.
_CA_CHUNK_ELEMENTS = 1 << 21


def _as_rng(rng: Union[Rng, int]) -> Rng:
    return rng if isinstance(rng, Rng) else Rng(int(rng))


# ---------------------------------------------------------------------------
# Behaviour tables
# ---------------------------------------------------------------------------

class TmAction(NamedTuple):
    write: str
    move: str
    next_state: str


@dataclass(frozen=True)
class BehaviourTable:
    """A total Turing machine table over states x symbols."""

    states: Tuple[str, ...]
    symbols: Tuple[str, ...]
    actions: Mapping[Tuple[str, str], TmAction]
    start: str
    blank: str

    def __post_init__(self):
        for state in self.states:
            for symbol in self.symbols:
                if (state, symbol) not in self.actions:
                    raise HDCError(f"Behaviour table has no entry for state {state}, symbol {symbol}")
        for (state, symbol), action in self.actions.items():
            if action.write not in self.symbols:
                raise UnknownSymbolError(f"Entry ({state}, {symbol}) writes unknown symbol '{action.write}'")
            if action.next_state not in self.states:
                raise UnknownSymbolError(f"Entry ({state}, {symbol}) moves to unknown state '{action.next_state}'")
            if action.move not in MOVES:
                raise HDCError(f"Entry ({state}, {symbol}) has head move '{action.move}', expected L or R")
        if self.start not in self.states:
            raise UnknownSymbolError(f"Unknown start state '{self.start}'")
        if self.blank not in self.symbols:
            raise UnknownSymbolError(f"Unknown blank symbol '{self.blank}'")


def load_behaviour_table(text: str, start: Optional[str] = None, blank: Optional[str] = None) -> BehaviourTable:
    """
    Parse a Turing machine table from delimited text.

    Each data row is state, read symbol, write symbol, move (L/R) and next
    state, separated by tabs or commas. Lines starting with '#' are
    comments. The start state defaults to the first state listed and the
    blank to the first symbol read.
    """
    states: List[str] = []
    symbols: List[str] = []
    actions: Dict[Tuple[str, str], TmAction] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = [field.strip() for field in line.replace(",", "\t").split("\t")]
        if len(fields) != 5:
            raise HDCError(f"Line {line_no}: expected 5 fields (state, read, write, move, next), got {len(fields)}")
        state, read, write, move, next_state = fields
        move = move.upper()
        if state not in states:
            states.append(state)
        if read not in symbols:
            symbols.append(read)
        if (state, read) in actions:
            raise HDCError(f"Line {line_no}: duplicate entry for state {state}, symbol {read}")
        actions[(state, read)] = TmAction(write, move, next_state)
    if not actions:
        raise HDCError("Behaviour table has no entries")
    return BehaviourTable(
        states=tuple(states),
        symbols=tuple(symbols),
        actions=actions,
        start=start if start is not None else states[0],
        blank=blank if blank is not None else symbols[0],
    )


def default_behaviour_table() -> BehaviourTable:
    """The built-in (2,4) machine."""
    return load_behaviour_table(
        behaviour_tables.TM_2_4,
        start=behaviour_tables.TM_2_4_START,
        blank=behaviour_tables.TM_2_4_BLANK,
    )


# ---------------------------------------------------------------------------
# Symbolic oracles
# ---------------------------------------------------------------------------

class SymbolicTuringMachine:
    """Direct table interpreter on a sparse tape that extends on demand."""

    def __init__(self, table: BehaviourTable, cells: Optional[Sequence[str]] = None, head: int = 0, state: Optional[str] = None):
        cells = list(cells) if cells else [table.blank]
        if not 0 <= head < len(cells):
            raise HDCError(f"Head position {head} outside a tape of {len(cells)} cells")
        self.table = table
        self.tape: Dict[int, str] = dict(enumerate(cells))
        self.head = head
        self.state = state if state is not None else table.start
        self.low = 0
        self.high = len(cells) - 1
        self.steps = 0

    def read(self) -> str:
        return self.tape.get(self.head, self.table.blank)

    def current_key(self) -> Tuple[str, str]:
        return self.state, self.read()

    def step(self) -> TmAction:
        action = self.table.actions[self.current_key()]
        self.tape[self.head] = action.write
        self.state = action.next_state
        self.head += MOVES[action.move]
        self.low = min(self.low, self.head)
        self.high = max(self.high, self.head)
        self.steps += 1
        return action

    def run(self, steps: int) -> None:
        for _ in range(steps):
            self.step()

    def cells(self) -> Tuple[List[str], int]:
        """Return (cells from the leftmost to the rightmost visited position, head index)."""
        cells = [self.tape.get(position, self.table.blank) for position in range(self.low, self.high + 1)]
        return cells, self.head - self.low


def rule_table(rule: int) -> Dict[Tuple[int, int, int], int]:
    """Map every neighbourhood (left, centre, right) to the next centre state."""
    if not 0 <= rule <= 255:
        raise HDCError(f"Elementary CA rules are numbered 0-255, got {rule}")
    return {
        (x, y, z): (rule >> (4 * x + 2 * y + z)) & 1
        for x in (1, 0) for y in (1, 0) for z in (1, 0)
    }


def eca_step(bits: Sequence[int], rule: int) -> np.ndarray:
    """One step of an elementary cellular automaton with a periodic boundary."""
    if not 0 <= rule <= 255:
        raise HDCError(f"Elementary CA rules are numbered 0-255, got {rule}")
    table = np.unpackbits(np.uint8(rule), bitorder="little").reshape(2, 2, 2)
    state = np.asarray(bits, dtype=np.uint8)
    wrapped = np.pad(state, 1, mode="wrap")
    return table[wrapped[:-2], wrapped[1:-1], wrapped[2:]]


def load_ca_rule(text: str) -> int:
    """
    Parse a CA rule: either a bare rule number or one `xyz<TAB>next` row per neighbourhood.
    """
    rows = [line.strip() for line in text.splitlines() if line.strip() and not line.strip().startswith("#")]
    if len(rows) == 1 and rows[0].isdigit():
        rule = int(rows[0])
        rule_table(rule)
        return rule
    rule = 0
    seen = set()
    for row in rows:
        fields = row.replace(",", "\t").split()
        if len(fields) != 2 or len(fields[0]) != 3 or set(fields[0]) - {"0", "1"} or fields[1] not in CA_STATES:
            raise HDCError(f"Malformed CA rule row {row!r}")
        index = int(fields[0], 2)
        if index in seen:
            raise HDCError(f"Neighbourhood {fields[0]} listed twice")
        seen.add(index)
        rule |= int(fields[1]) << index
    if len(seen) != 8:
        raise HDCError(f"A CA rule needs all 8 neighbourhoods, got {len(seen)}")
    return rule


def parse_bits(text: str) -> List[int]:
    bits = [c for c in text.strip() if not c.isspace()]
    if set(bits) - {"0", "1"}:
        raise HDCError(f"Grid must be a string of 0s and 1s, got {text!r}")
    return [int(c) for c in bits]


def format_bits(bits: Sequence[int]) -> str:
    return "".join(str(int(b)) for b in bits)


# ---------------------------------------------------------------------------
# Turing machine emulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TmMachine:
    table: BehaviourTable
    state_cb: ItemMemory
    sym_cb: ItemMemory
    rules: HeteroMemory
    row_keys: Tuple[Tuple[str, str], ...]

    @property
    def dim(self) -> int:
        return self.state_cb.dim

    def row_action(self, row: int) -> TmAction:
        return self.table.actions[self.row_keys[row]]

    def row_index(self, state: str, symbol: str) -> int:
        return self.row_keys.index((state, symbol))


def tm_build(table: BehaviourTable, dim: int, rng: Union[Rng, int], max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> TmMachine:
    """
    Build the item memories and the rule memory of a Turing machine.

    Addresses bind(state, symbol) must be pairwise distinct; on a collision
    the state and symbol memories are regenerated from the next sub-seed.

    Raises:
        DuplicateAddressError: if no collision-free draw is found in max_attempts
    """
    rng = _as_rng(rng)
    row_keys = tuple((state, symbol) for state in table.states for symbol in table.symbols)
    contents = [table.actions[key]._asdict() for key in row_keys]
    for attempt in range(max_attempts):
        sub = rng.split(attempt)
        state_cb = ItemMemory.random(table.states, dim, sub.split(0))
        sym_cb = ItemMemory.random(table.symbols, dim, sub.split(1))
        addresses = [bind(state_cb.vector(state), sym_cb.vector(symbol)) for state, symbol in row_keys]
        try:
            rules = HeteroMemory(addresses, contents)
        except DuplicateAddressError:
            logger.info("Address collision at dim %d (attempt %d), regenerating item memories", dim, attempt + 1)
            continue
        return TmMachine(table, state_cb, sym_cb, rules, row_keys)
    raise DuplicateAddressError(f"No collision-free item memories at dim {dim} after {max_attempts} attempts")


@dataclass(frozen=True)
class TmTape:
    cells: Tuple[Hypervector, ...]
    head: int
    current_state: Hypervector
    blank: str

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        if not 0 <= self.head < len(self.cells):
            raise HDCError(f"Head position {self.head} outside a tape of {len(self.cells)} cells")


class TmRun(NamedTuple):
    tape: TmTape
    first_divergence: Optional[int]
    steps: int


def tm_initial_tape(m: TmMachine, symbols: Optional[Sequence[str]] = None, head: int = 0, state: Optional[str] = None) -> TmTape:
    symbols = list(symbols) if symbols else [m.table.blank]
    return TmTape(
        cells=tuple(m.sym_cb.vector(symbol) for symbol in symbols),
        head=head,
        current_state=m.state_cb.vector(state if state is not None else m.table.start),
        blank=m.table.blank,
    )


def tm_step(m: TmMachine, tape: TmTape, noise_p: float = 0.0, rng: Optional[RandomSource] = None) -> TmTape:
    """
    Execute one machine step.

    The read cell is corrupted by flip_noise(noise_p) before the rule
    lookup; the written cell always receives the clean seed vector.
    """
    cell = tape.cells[tape.head]
    if noise_p > 0:
        if rng is None:
            raise HDCError("A random source is required when noise_p > 0")
        cell = flip_noise(cell, noise_p, rng)
    row, _ = m.rules.lookup_row(bind(tape.current_state, cell))
    action = m.row_action(row)
    cells = list(tape.cells)
    cells[tape.head] = m.sym_cb.vector(action.write)
    head = tape.head + MOVES[action.move]
    if head < 0:
        cells.insert(0, m.sym_cb.vector(tape.blank))
        head = 0
    elif head == len(cells):
        cells.append(m.sym_cb.vector(tape.blank))
    return TmTape(tuple(cells), head, m.state_cb.vector(action.next_state), tape.blank)


def tm_run(
    m: TmMachine,
    tape: TmTape,
    steps: int,
    noise_p: float = 0.0,
    rng: Optional[RandomSource] = None,
    oracle: Optional[SymbolicTuringMachine] = None,
    stop_on_divergence: bool = False,
) -> TmRun:
    """
    Run the emulation for a number of steps, optionally against an oracle.

    Cells always hold clean seed vectors, so the tape is tracked as a sparse
    map of symbol indices and only the read is materialised as a vector.

    Args:
        m: Machine
        tape: Starting tape
        steps: Step budget
        noise_p: Bit error rate applied to every read
        rng: Random source for the noise (one stream for the whole run)
        oracle: Interpreter started from the same configuration; advanced in lockstep
        stop_on_divergence: Stop at the first step whose rule row differs from the oracle's

    Returns:
        TmRun with the final tape, the first diverging step (1-based) or None,
        and the number of steps executed
    """
    if steps < 0:
        raise HDCError(f"Step budget must be non-negative, got {steps}")
    if noise_p > 0 and rng is None:
        raise HDCError("A random source is required when noise_p > 0")
    generator = as_generator(rng) if noise_p > 0 else None
    sym_vectors = m.sym_cb.vectors
    state_vectors = m.state_cb.vectors
    blank = m.sym_cb.index(tape.blank)
    cells = {
        position: m.sym_cb.index(m.sym_cb.cleanup(vector).name)
        for position, vector in enumerate(tape.cells)
    }
    head = tape.head
    low, high = 0, len(tape.cells) - 1
    state = m.state_cb.index(m.state_cb.cleanup(tape.current_state).name)
    row_write = [m.sym_cb.index(m.row_action(r).write) for r in range(len(m.row_keys))]
    row_next = [m.state_cb.index(m.row_action(r).next_state) for r in range(len(m.row_keys))]
    row_move = [MOVES[m.row_action(r).move] for r in range(len(m.row_keys))]

    first_divergence = None
    executed = 0
    for step in range(1, steps + 1):
        read = sym_vectors[cells.get(head, blank)]
        if generator is not None:
            read = flip_noise(read, noise_p, generator)
        row, _ = m.rules.lookup_row(bind(state_vectors[state], read))
        if oracle is not None:
            expected = m.row_index(*oracle.current_key())
            oracle.step()
            if row != expected and first_divergence is None:
                first_divergence = step
                logger.debug("Emulation diverged from the oracle at step %d (dim %d)", step, m.dim)
        cells[head] = row_write[row]
        state = row_next[row]
        head += row_move[row]
        low = min(low, head)
        high = max(high, head)
        executed = step
        if first_divergence is not None and stop_on_divergence:
            break

    final = TmTape(
        cells=tuple(sym_vectors[cells.get(position, blank)] for position in range(low, high + 1)),
        head=head - low,
        current_state=state_vectors[state],
        blank=tape.blank,
    )
    return TmRun(final, first_divergence, executed)


def decode_tape(tape: TmTape, m: TmMachine) -> Tuple[List[str], int, str]:
    """Return (cell symbols, head index, state name) by clean-up of every vector."""
    symbols = [m.sym_cb.cleanup(cell).name for cell in tape.cells]
    return symbols, tape.head, m.state_cb.cleanup(tape.current_state).name


def format_tape(symbols: Sequence[str], head: int, state: str) -> str:
    """Render a tape as `state: s s [s] s`, the head cell in brackets."""
    rendered = [f"[{symbol}]" if i == head else symbol for i, symbol in enumerate(symbols)]
    return f"{state}: {' '.join(rendered)}"


def tm_required_dimension(
    table: BehaviourTable,
    noise_p: float,
    target_steps: int,
    rng: Union[Rng, int],
    start_dim: int = TM_START_DIM,
    growth: float = TM_GROWTH,
    max_dim: int = TM_MAX_DIM,
) -> int:
    """
    Grow the dimension until one emulation runs target_steps without diverging.

    Starting at start_dim, every failed attempt rebuilds the machine at
    ceil(growth * dim). Attempt k always uses the sub-seeds (k, 0) for the
    memories and (k, 1) for the noise, so a longer target never returns a
    smaller dimension for the same rng.

    Raises:
        HDCError: if max_dim is exceeded
    """
    if target_steps < 1:
        raise HDCError(f"target_steps must be at least 1, got {target_steps}")
    if growth <= 1:
        raise HDCError(f"growth must exceed 1, got {growth}")
    rng = _as_rng(rng)
    dim = start_dim
    attempt = 0
    while dim <= max_dim:
        m = tm_build(table, dim, rng.split(attempt, 0))
        oracle = SymbolicTuringMachine(table)
        run = tm_run(
            m,
            tm_initial_tape(m),
            target_steps,
            noise_p=noise_p,
            rng=rng.split(attempt, 1),
            oracle=oracle,
            stop_on_divergence=True,
        )
        if run.first_divergence is None:
            logger.info("BER %.3f: %d error-free steps at dim %d", noise_p, target_steps, dim)
            return dim
        logger.debug("BER %.3f: dim %d failed at step %d", noise_p, dim, run.first_divergence)
        dim = max(dim + 1, math.ceil(growth * dim))
        attempt += 1
    raise HDCError(f"No dimension up to {max_dim} reached {target_steps} error-free steps at BER {noise_p}")


def tm_dimension_search(
    table: BehaviourTable,
    noise_p: float,
    target_steps: int,
    trials: int,
    rng: Union[Rng, int],
    **kwargs,
) -> float:
    """Average tm_required_dimension over independent trials (sub-seeds 0..trials-1)."""
    if trials < 1:
        raise HDCError(f"trials must be at least 1, got {trials}")
    rng = _as_rng(rng)
    dims = [tm_required_dimension(table, noise_p, target_steps, rng.split(trial), **kwargs) for trial in range(trials)]
    return float(np.mean(dims))


# ---------------------------------------------------------------------------
# Cellular automaton emulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CaMachine:
    rule: int
    role_cb: ItemMemory
    state_cb: ItemMemory
    rules: HeteroMemory
    row_next: np.ndarray

    @property
    def dim(self) -> int:
        return self.state_cb.dim


@dataclass(frozen=True)
class CaGrid:
    length: int
    acc: Hypervector
    boundary: str = BOUNDARY_PERIODIC


def _neighbourhood_address(role_cb: ItemMemory, state_cb: ItemMemory, x: int, y: int, z: int) -> Hypervector:
    terms = [
        bind(role_cb.vector(role), state_cb.vector(CA_STATES[bit]))
        for role, bit in zip(CA_ROLES, (x, y, z))
    ]
    return normalize(bundle(terms))


def ca_build(rule: Union[int, Mapping[Tuple[int, int, int], int]], dim: int, rng: Union[Rng, int], max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> CaMachine:
    """
    Build the role, state and rule memories of an elementary CA.

    The rule memory has one row per neighbourhood, 111 first and 000 last,
    addressed by normalize(l*x + c*y + r*z) with the next centre state as payload.

    Args:
        rule: Rule number or a neighbourhood -> next-state mapping
        dim: Hypervector dimension
        rng: Random source; collisions regenerate from the next sub-seed
    """
    if not isinstance(rule, (int, np.integer)):
        mapping = dict(rule)
        if len(mapping) != 8:
            raise HDCError(f"A CA rule needs all 8 neighbourhoods, got {len(mapping)}")
        rule = sum(int(bit) << (4 * x + 2 * y + z) for (x, y, z), bit in mapping.items())
    rule = int(rule)
    table = rule_table(rule)
    neighbourhoods = list(table)
    contents = [{"neighbourhood": f"{x}{y}{z}", "next": str(table[(x, y, z)])} for x, y, z in neighbourhoods]
    row_next = np.array([table[key] for key in neighbourhoods], dtype=np.int64)
    row_next.setflags(write=False)
    rng = _as_rng(rng)
    for attempt in range(max_attempts):
        sub = rng.split(attempt)
        role_cb = ItemMemory.random(CA_ROLES, dim, sub.split(0))
        state_cb = ItemMemory.random(CA_STATES, dim, sub.split(1))
        addresses = [_neighbourhood_address(role_cb, state_cb, *key) for key in neighbourhoods]
        try:
            rules = HeteroMemory(addresses, contents)
        except DuplicateAddressError:
            logger.info("Neighbourhood address collision at dim %d (attempt %d), regenerating", dim, attempt + 1)
            continue
        return CaMachine(rule, role_cb, state_cb, rules, row_next)
    raise DuplicateAddressError(f"No collision-free CA memories at dim {dim} after {max_attempts} attempts")


def _chunk_size(dim: int) -> int:
    return max(1, _CA_CHUNK_ELEMENTS // dim)


def _unpermuted_rows(values: np.ndarray, shifts: np.ndarray) -> np.ndarray:
    """Row s is permute(values, -shifts[s])."""
    dim = values.shape[0]
    return values[(np.arange(dim)[None, :] + shifts[:, None]) % dim]


def _check_grid(g: CaGrid, m: CaMachine) -> None:
    if g.boundary != BOUNDARY_PERIODIC:
        raise HDCError(f"Unsupported boundary '{g.boundary}'")
    if g.acc.dim != m.dim:
        raise HDCError(f"Grid dimension {g.acc.dim} != machine dimension {m.dim}")


def ca_encode_grid(bits: Union[str, Sequence[int]], m: CaMachine) -> CaGrid:
    """Encode cells 1..l as normalize(sum_j permute(state_j, j))."""
    if isinstance(bits, str):
        bits = parse_bits(bits)
    bits = [int(b) for b in bits]
    if len(bits) < CA_MIN_LENGTH:
        raise HDCError(f"A grid needs at least {CA_MIN_LENGTH} cells, got {len(bits)}")
    if set(bits) - {0, 1}:
        raise HDCError("Grid cells must be 0 or 1")
    states = m.state_cb.vectors
    acc = bundle(permute(states[bit], j) for j, bit in enumerate(bits, start=1))
    return CaGrid(len(bits), normalize(acc, m.state_cb.tiebreak))


def ca_decode_grid(g: CaGrid, m: CaMachine) -> List[int]:
    """Clean up permute(acc, -j) against the two state vectors for every cell j."""
    _check_grid(g, m)
    values = g.acc.bipolar()
    states = m.state_cb.bipolar_matrix().astype(np.int32)
    positions = np.arange(1, g.length + 1)
    decoded = []
    step = _chunk_size(m.dim)
    for start in range(0, g.length, step):
        rows = _unpermuted_rows(values, positions[start:start + step]).astype(np.int32)
        decoded.extend(int(i) for i in np.argmax(rows @ states.T, axis=1))
    return decoded


def ca_step(g: CaGrid, m: CaMachine, noise_p: float = 0.0, rng: Optional[RandomSource] = None) -> CaGrid:
    """
    Advance the emulated grid by one step.

    For every cell j the neighbourhood estimate
    normalize(l * unpermute(acc, left) + c * unpermute(acc, j) + r * unpermute(acc, right))
    is looked up in the rule memory, and the returned states are
    re-superposed at their positions. A three-term sum never ties.
    """
    _check_grid(g, m)
    acc = g.acc
    if noise_p > 0:
        if rng is None:
            raise HDCError("A random source is required when noise_p > 0")
        acc = flip_noise(acc, noise_p, rng)
    dim = m.dim
    length = g.length
    values = acc.bipolar()
    left_role, centre_role, right_role = (m.role_cb.vector(role).bipolar() for role in CA_ROLES)
    states = m.state_cb.bipolar_matrix()

    positions = np.arange(1, length + 1)
    left = np.where(positions == 1, length, positions - 1)
    right = np.where(positions == length, 1, positions + 1)

    total = np.zeros(dim, dtype=np.int64)
    step = _chunk_size(dim)
    for start in range(0, length, step):
        chunk = slice(start, start + step)
        estimate = (
            left_role * _unpermuted_rows(values, left[chunk])
            + centre_role * _unpermuted_rows(values, positions[chunk])
            + right_role * _unpermuted_rows(values, right[chunk])
        )
        queries = np.where(estimate > 0, 1, -1).astype(np.int8)
        next_states = m.row_next[m.rules.lookup_rows(queries)]
        placed = states[next_states]
        cell_positions = positions[chunk]
        shifted = placed[np.arange(len(cell_positions))[:, None], (np.arange(dim)[None, :] - cell_positions[:, None]) % dim]
        total += shifted.sum(axis=0, dtype=np.int64)
    return CaGrid(length, normalize(Accumulator(total, length), m.state_cb.tiebreak), g.boundary)


def ca_run(g: CaGrid, m: CaMachine, steps: int, noise_p: float = 0.0, rng: Optional[RandomSource] = None) -> CaGrid:
    generator = as_generator(rng) if rng is not None else None
    for _ in range(steps):
        g = ca_step(g, m, noise_p, generator)
    return g


def ca_error_rate(
    bits: Sequence[int],
    m: CaMachine,
    steps: int,
    noise_p: float = 0.0,
    rng: Optional[RandomSource] = None,
) -> float:
    """Fraction of cells whose emulated state differs from the oracle after `steps` steps."""
    expected = np.asarray(bits, dtype=np.uint8)
    for _ in range(steps):
        expected = eca_step(expected, m.rule)
    final = ca_run(ca_encode_grid(list(bits), m), m, steps, noise_p, rng)
    decoded = np.asarray(ca_decode_grid(final, m), dtype=np.uint8)
    return float(np.mean(decoded != expected))
