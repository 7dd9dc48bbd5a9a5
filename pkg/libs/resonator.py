"""
Resonator Network Module

Factorizes a bind-product s = x_1 * x_2 * ... * x_F, where each factor is
an entry of a known codebook, by iterating clean-up in superposition:

    x_f(t+1) = sign(project(cb_f, s * prod_{g != f} x_g(t)))

All factors are updated synchronously from the previous iteration's
predictions. A result is reported as converged only when re-binding the
retrieved factors reproduces s exactly.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from hypervectors import (
    DimensionMismatchError,
    HDCError,
    Hypervector,
    Rng,
    as_generator,
    bind,
    bind_all,
    normalize,
)
from item_memory import ItemMemory

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITERS = 200


@dataclass(frozen=True)
class ResonatorProblem:
    input: Hypervector
    codebooks: Tuple[ItemMemory, ...]
    max_iters: int = DEFAULT_MAX_ITERS

    def __post_init__(self):
        object.__setattr__(self, "codebooks", tuple(self.codebooks))
        if len(self.codebooks) < 2:
            raise HDCError(f"A resonator needs at least 2 factors, got {len(self.codebooks)}")
        if self.max_iters < 1:
            raise HDCError(f"max_iters must be positive, got {self.max_iters}")
        for f, codebook in enumerate(self.codebooks):
            if codebook.dim != self.input.dim:
                raise DimensionMismatchError(
                    f"Codebook {f} has dimension {codebook.dim}, input has {self.input.dim}"
                )
            if len(codebook) == 0:
                raise HDCError(f"Codebook {f} is empty")

    @property
    def factor_count(self) -> int:
        return len(self.codebooks)

    @property
    def search_space(self) -> int:
        return int(np.prod([len(codebook) for codebook in self.codebooks], dtype=object))


@dataclass(frozen=True)
class ResonatorResult:
    factors: Tuple[str, ...]
    converged: bool
    iterations: int
    trajectory: Optional[Tuple[Tuple[Hypervector, ...], ...]] = None


def _initial_predictions(problem: ResonatorProblem) -> List[Hypervector]:
    return [
        normalize(codebook.combine(np.ones(len(codebook), dtype=np.int64)), codebook.tiebreak)
        for codebook in problem.codebooks
    ]


def _update(problem: ResonatorProblem, predictions: Sequence[Hypervector]) -> List[Hypervector]:
    updated = []
    for f, codebook in enumerate(problem.codebooks):
        others = [predictions[g] for g in range(len(predictions)) if g != f]
        query = bind(problem.input, bind_all(*others))
        updated.append(normalize(codebook.project(query), codebook.tiebreak))
    return updated


def factorize(problem: ResonatorProblem, record_trajectory: bool = False) -> ResonatorResult:
    """
    Run the resonator dynamics until a fixed point or max_iters.

    Args:
        problem: Product vector, codebooks and iteration limit
        record_trajectory: Keep every iteration's predictions

    Returns:
        ResonatorResult with the cleaned-up factor names
    """
    predictions = _initial_predictions(problem)
    trajectory = [tuple(predictions)] if record_trajectory else None
    iterations = 0
    fixed_point = False
    while iterations < problem.max_iters:
        updated = _update(problem, predictions)
        iterations += 1
        if record_trajectory:
            trajectory.append(tuple(updated))
        if updated == predictions:
            fixed_point = True
            break
        predictions = updated

    matches = [codebook.cleanup(prediction) for codebook, prediction in zip(problem.codebooks, predictions)]
    factors = tuple(match.name for match in matches)
    converged = fixed_point and bind_all(*(match.vector for match in matches)) == problem.input
    logger.debug(
        "Resonator stopped after %d iterations (fixed point: %s, converged: %s)",
        iterations, fixed_point, converged,
    )
    return ResonatorResult(
        factors=factors,
        converged=converged,
        iterations=iterations,
        trajectory=tuple(trajectory) if record_trajectory else None,
    )


def brute_force_factorize(s: Hypervector, codebooks: Sequence[ItemMemory]) -> List[Tuple[str, ...]]:
    """
    Exhaustively list every combination of entries whose bind equals s exactly.

    The last codebook is resolved by a hash lookup, so the cost is the
    product of the other codebook sizes.
    """
    if len(codebooks) < 1:
        raise HDCError("Brute-force factorization needs at least one codebook")
    *leading, last = codebooks
    last_index: Dict[bytes, List[str]] = {}
    for name, vector in last:
        last_index.setdefault(vector.packed.tobytes(), []).append(name)

    solutions = []
    for combination in itertools.product(*(list(codebook) for codebook in leading)):
        partial = bind_all(s, *(vector for _, vector in combination)) if combination else s
        for name in last_index.get(partial.packed.tobytes(), []):
            solutions.append(tuple(n for n, _ in combination) + (name,))
    return solutions


def factor_names(factor: int, size: int) -> List[str]:
    """Entry names of codebook `factor`: a0..a{size-1}, b0.., ..."""
    prefix = chr(ord("a") + factor) if factor < 26 else f"f{factor}_"
    return [f"{prefix}{i}" for i in range(size)]


def random_problem(
    factors: int,
    size: int,
    dim: int,
    rng: Rng,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> Tuple[ResonatorProblem, Tuple[str, ...]]:
    """
    Draw random codebooks and a random product of one entry from each.

    Returns:
        Tuple of (problem, names of the true factors)
    """
    codebooks = [ItemMemory.random(factor_names(f, size), dim, rng.split(f)) for f in range(factors)]
    generator = as_generator(rng.split(factors))
    chosen = [int(generator.integers(size)) for _ in range(factors)]
    product = bind_all(*(codebook.vectors[i] for codebook, i in zip(codebooks, chosen)))
    truth = tuple(codebook.names[i] for codebook, i in zip(codebooks, chosen))
    return ResonatorProblem(product, tuple(codebooks), max_iters), truth
