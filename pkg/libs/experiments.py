"""
Experiment Harness Module

Parameter sweeps that measure how the encodings behave as the dimension,
noise and problem size vary. Every experiment expands its parameter grid
into independent tasks, one per (trial, grid point), each seeded from the
master seed by Rng.split. Tasks may run in a process pool; results are
collected in task order, so the CSV only depends on (parameters, seed).

CSV schema, one row per measurement:

    experiment,param_json,trial,x_name,x_value,metric,value
"""

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from hypervectors import HDCError, Rng, as_generator, flip_noise, normalize
from item_memory import ItemMemory
from encoders import decode_histogram, encode_multiset, fsa_encode, fsa_step, random_fsa
from resonator import DEFAULT_MAX_ITERS, factorize, random_problem
from substring_search import (
    DEFAULT_ALPHABET,
    MIN_CALIBRATION_TRIALS,
    VARIANT_CLEANUP,
    VARIANT_ORIGINAL,
    build_string_automaton,
    calibrate_threshold,
    naive_find,
    random_absent_query,
    run_query,
)
from universal import ca_build, ca_error_rate, default_behaviour_table, tm_required_dimension

logger = logging.getLogger(__name__)

CSV_HEADER = ["experiment", "param_json", "trial", "x_name", "x_value", "metric", "value"]

THRESHOLD_HALF = "half"
THRESHOLD_CALIBRATED = "calibrated"


def _powers_of_two(low: int, high: int) -> List[int]:
    return [1 << i for i in range(low, high + 1)]


EXPERIMENT_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "histogram": {
        "sizes": [16, 32, 64, 128, 256, 512],
        "dims": list(range(200, 10001, 200)),
        "max_count": 1023,
        "trials": 10,
    },
    "fsa-recall": {
        "states": 22,
        "symbols": 29,
        "out_degree": 1,
        "dims": list(range(100, 4001, 100)),
        "noise": [0.03125, 0.0625, 0.125, 0.25],
        "transitions": 200,
        "trials": 10,
    },
    "substring-original": {
        "query_len": 5,
        "base_lens": [8, 16, 32],
        "dims": _powers_of_two(8, 16),
        "bases": 100,
        "alphabet_size": 26,
        "threshold": THRESHOLD_HALF,
        "trials": 5,
    },
    "substring-cleanup": {
        "query_len": 30,
        "base_lens": [32, 64, 128, 256],
        "dims": _powers_of_two(6, 12),
        "bases": 100,
        "alphabet_size": 26,
        "threshold": THRESHOLD_HALF,
        "trials": 5,
    },
    "tm-noise": {
        "noise": [0.05, 0.10, 0.15, 0.20, 0.25, 0.30],
        "target_steps": 10_000,
        "start_dim": 16,
        "growth": 1.1,
        "trials": 10,
    },
    "ca110": {
        "rule": 110,
        "lengths": [32, 64, 128],
        "dims": _powers_of_two(10, 15),
        "noise": [0.0],
        "steps": 100,
        "trials": 5,
    },
    "ca110-noise": {
        "rule": 110,
        "lengths": [32],
        "dims": _powers_of_two(10, 15),
        "noise": [0.03125, 0.0625, 0.125, 0.25],
        "steps": 100,
        "trials": 5,
    },
    "resonator": {
        "factors": 3,
        "size": 8,
        "dims": [256, 512, 1024, 2048],
        "max_iters": DEFAULT_MAX_ITERS,
        "trials": 100,
    },
}

PAPER_SCALE_OVERRIDES: Dict[str, Dict[str, Any]] = {
    "histogram": {"trials": 100},
    "fsa-recall": {"transitions": 1000, "trials": 50},
    "substring-original": {"trials": 50},
    "substring-cleanup": {"trials": 50},
    "tm-noise": {"target_steps": 10_000_000, "trials": 100},
    "ca110": {"lengths": _powers_of_two(5, 10), "dims": _powers_of_two(10, 17), "trials": 100},
    "ca110-noise": {"dims": _powers_of_two(10, 17), "trials": 100},
    "resonator": {"trials": 1000},
}

EXPERIMENTS = tuple(EXPERIMENT_DEFAULTS)


@dataclass(frozen=True)
class ResultRow:
    trial: int
    series: Mapping[str, Any]
    x_name: str
    x_value: float
    metric: str
    value: float

    def as_csv(self, experiment: str) -> List[str]:
        return [
            experiment,
            json.dumps(dict(self.series), sort_keys=True),
            str(self.trial),
            self.x_name,
            repr(self.x_value),
            self.metric,
            repr(float(self.value)),
        ]


@dataclass
class ExperimentResult:
    experiment: str
    params: Dict[str, Any]
    seed: int
    rows: List[ResultRow] = field(default_factory=list)

    def write_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for row in self.rows:
                writer.writerow(row.as_csv(self.experiment))

    def write_params(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"experiment": self.experiment, "seed": self.seed, "params": self.params}, f, indent=2, sort_keys=True)
            f.write("\n")

    def summary(self) -> List[Tuple[str, float, str, float]]:
        """Mean value per (series, x value, metric), in first-seen order."""
        groups: Dict[Tuple[str, float, str], List[float]] = {}
        for row in self.rows:
            key = (json.dumps(dict(row.series), sort_keys=True), row.x_value, row.metric)
            groups.setdefault(key, []).append(float(row.value))
        return [(series, x, metric, float(np.mean(values))) for (series, x, metric), values in groups.items()]


# ---------------------------------------------------------------------------
# Trial functions (top level so a process pool can pickle them)
# ---------------------------------------------------------------------------

def _pearson(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.std() == 0 or b.std() == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


def histogram_trial(seed: int, trial: int, size: int, dims: Sequence[int], max_count: int) -> List[ResultRow]:
    rng = Rng(seed).split(trial, size)
    counts = as_generator(rng.split(0)).integers(0, max_count + 1, size=size)
    names = [f"x{i}" for i in range(size)]
    histogram = dict(zip(names, (int(c) for c in counts)))
    rows = []
    for dim in dims:
        cb = ItemMemory.random(names, dim, rng.split(1, dim))
        compound = normalize(encode_multiset(cb, histogram), cb.tiebreak)
        estimates = decode_histogram(compound, cb)
        correlation = _pearson(counts, [estimates[name] for name in names])
        rows.append(ResultRow(trial, {"size": size}, "dim", dim, "correlation", correlation))
    return rows


def fsa_recall_trial(
    seed: int,
    trial: int,
    dim: int,
    states: int,
    symbols: int,
    out_degree: int,
    noise: Sequence[float],
    transitions: int,
) -> List[ResultRow]:
    rng = Rng(seed).split(trial)
    desc = random_fsa(states, symbols, out_degree, rng.split(0))
    dim_rng = rng.split(1, dim)
    state_cb = ItemMemory.random(desc.states, dim, dim_rng.split(0))
    sym_cb = ItemMemory.random(desc.symbols, dim, dim_rng.split(1))
    automaton = normalize(fsa_encode(desc, state_cb, sym_cb), state_cb.tiebreak)
    table = desc.transitions
    rows = []
    for k, ber in enumerate(noise):
        generator = as_generator(dim_rng.split(2, k))
        correct = 0
        for index in generator.integers(len(table), size=transitions):
            source, symbol, target = table[int(index)]
            noisy = flip_noise(automaton, ber, generator)
            name, _ = fsa_step(noisy, state_cb.vector(source), sym_cb.vector(symbol), state_cb)
            correct += name == target
        rows.append(ResultRow(trial, {"ber": ber}, "dim", dim, "accuracy", correct / transitions))
    return rows


def substring_trial(
    seed: int,
    trial: int,
    base_len: int,
    dims: Sequence[int],
    variant: str,
    query_len: int,
    bases: int,
    alphabet_size: int,
    threshold: str,
) -> List[ResultRow]:
    """Accuracy of present/absent detection over random bases, roughly half of them positive."""
    if threshold not in (THRESHOLD_HALF, THRESHOLD_CALIBRATED):
        raise HDCError(f"threshold must be '{THRESHOLD_HALF}' or '{THRESHOLD_CALIBRATED}', got '{threshold}'")
    alphabet = DEFAULT_ALPHABET[:alphabet_size]
    rng = Rng(seed).split(trial, base_len)
    generator = as_generator(rng.split(0))
    instances = []
    for _ in range(bases):
        base = tuple(alphabet[int(i)] for i in generator.integers(len(alphabet), size=base_len))
        positive = query_len <= base_len and generator.random() < 0.5
        if positive:
            start = int(generator.integers(base_len - query_len + 1))
            query = base[start:start + query_len]
        else:
            query = None
        instances.append((base, query))

    rows = []
    for dim in dims:
        dim_rng = rng.split(1, dim)
        query_rng = as_generator(dim_rng.split(0))
        cutoff = None
        correct = 0
        for b, (base, query) in enumerate(instances):
            sa = build_string_automaton(base, dim, dim_rng.split(1, b), alphabet=alphabet)
            if query is None:
                query = random_absent_query(sa, query_len, query_rng)
            if threshold == THRESHOLD_CALIBRATED and cutoff is None:
                cutoff = calibrate_threshold(sa, dim_rng.split(2), MIN_CALIBRATION_TRIALS, variant, query_len)
            outcome = run_query(sa, query, threshold=cutoff, variant=variant)
            correct += outcome.present == bool(naive_find(base, query))
        rows.append(ResultRow(trial, {"base_len": base_len}, "dim", dim, "accuracy", correct / bases))
    return rows


def tm_noise_trial(seed: int, trial: int, ber: float, target_steps: int, start_dim: int, growth: float) -> List[ResultRow]:
    dim = tm_required_dimension(
        default_behaviour_table(),
        ber,
        target_steps,
        Rng(seed).split(trial),
        start_dim=start_dim,
        growth=growth,
    )
    return [ResultRow(trial, {"target_steps": target_steps}, "ber", ber, "dimension", dim)]


def ca_trial(seed: int, trial: int, rule: int, length: int, ber: float, dim: int, steps: int) -> List[ResultRow]:
    rng = Rng(seed).split(trial, length)
    bits = [int(b) for b in as_generator(rng.split(0)).integers(0, 2, size=length)]
    machine = ca_build(rule, dim, rng.split(1, dim))
    error = ca_error_rate(bits, machine, steps, ber, rng.split(2, dim) if ber > 0 else None)
    return [ResultRow(trial, {"length": length, "ber": ber}, "dim", dim, "error_rate", error)]


def resonator_trial(seed: int, trial: int, factors: int, size: int, dim: int, max_iters: int) -> List[ResultRow]:
    problem, truth = random_problem(factors, size, dim, Rng(seed).split(trial, dim), max_iters)
    result = factorize(problem)
    series = {"factors": factors, "size": size}
    return [
        ResultRow(trial, series, "dim", dim, "success", float(result.converged and result.factors == truth)),
        ResultRow(trial, series, "dim", dim, "converged", float(result.converged)),
        ResultRow(trial, series, "dim", dim, "iterations", float(result.iterations)),
    ]


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------

Task = Callable[[], List[ResultRow]]


def _tasks(name: str, p: Mapping[str, Any], seed: int) -> List[Task]:
    trials = range(int(p["trials"]))
    if name == "histogram":
        return [
            partial(histogram_trial, seed, t, int(size), list(p["dims"]), int(p["max_count"]))
            for t in trials for size in p["sizes"]
        ]
    if name == "fsa-recall":
        return [
            partial(
                fsa_recall_trial, seed, t, int(dim), int(p["states"]), int(p["symbols"]),
                int(p["out_degree"]), list(p["noise"]), int(p["transitions"]),
            )
            for t in trials for dim in p["dims"]
        ]
    if name in ("substring-original", "substring-cleanup"):
        variant = VARIANT_ORIGINAL if name == "substring-original" else VARIANT_CLEANUP
        return [
            partial(
                substring_trial, seed, t, int(base_len), list(p["dims"]), variant, int(p["query_len"]),
                int(p["bases"]), int(p["alphabet_size"]), p["threshold"],
            )
            for t in trials for base_len in p["base_lens"]
        ]
    if name == "tm-noise":
        return [
            partial(tm_noise_trial, seed, t, float(ber), int(p["target_steps"]), int(p["start_dim"]), float(p["growth"]))
            for t in trials for ber in p["noise"]
        ]
    if name in ("ca110", "ca110-noise"):
        return [
            partial(ca_trial, seed, t, int(p["rule"]), int(length), float(ber), int(dim), int(p["steps"]))
            for t in trials for length in p["lengths"] for ber in p["noise"] for dim in p["dims"]
        ]
    if name == "resonator":
        return [
            partial(resonator_trial, seed, t, int(p["factors"]), int(p["size"]), int(dim), int(p["max_iters"]))
            for t in trials for dim in p["dims"]
        ]
    raise HDCError(f"Unknown experiment '{name}' (expected one of {list(EXPERIMENTS)})")


def _call(task: Task) -> List[ResultRow]:
    return task()


def resolve_params(name: str, overrides: Optional[Mapping[str, Any]] = None, paper_scale: bool = False) -> Dict[str, Any]:
    """
    Merge defaults, paper-scale overrides and explicit overrides.

    Raises:
        HDCError: for an unknown experiment or parameter name
    """
    if name not in EXPERIMENT_DEFAULTS:
        raise HDCError(f"Unknown experiment '{name}' (expected one of {list(EXPERIMENTS)})")
    params = json.loads(json.dumps(EXPERIMENT_DEFAULTS[name]))
    if paper_scale:
        params.update(json.loads(json.dumps(PAPER_SCALE_OVERRIDES.get(name, {}))))
    for key, value in (overrides or {}).items():
        if key not in params:
            raise HDCError(f"Experiment '{name}' has no parameter '{key}' (known: {sorted(params)})")
        if isinstance(params[key], list) and not isinstance(value, list):
            value = [value]
        params[key] = value
    return params


def parse_dims(text: str) -> List[int]:
    """
    Parse a dimension grid: 'start:end:step' (inclusive, linear) or
    'start:end:xF' (geometric, factor F).
    """
    parts = text.split(":")
    if len(parts) != 3:
        raise HDCError(f"Dimension grid must be start:end:step, got '{text}'")
    try:
        start, end = int(parts[0]), int(parts[1])
        if parts[2].startswith("x"):
            factor = int(parts[2][1:])
            if factor < 2:
                raise HDCError(f"Geometric factor must be at least 2, got {factor}")
            dims = []
            dim = start
            while dim <= end:
                dims.append(dim)
                dim *= factor
        else:
            step = int(parts[2])
            if step < 1:
                raise HDCError(f"Step must be positive, got {step}")
            dims = list(range(start, end + 1, step))
    except ValueError as e:
        raise HDCError(f"Invalid dimension grid '{text}': {e}") from e
    if not dims or dims[0] < 1:
        raise HDCError(f"Dimension grid '{text}' is empty or non-positive")
    return dims


def run_experiment(
    name: str,
    overrides: Optional[Mapping[str, Any]] = None,
    seed: int = 0,
    output_path: Optional[str] = None,
    paper_scale: bool = False,
    workers: int = 1,
    progress: bool = False,
) -> ExperimentResult:
    """
    Run one experiment grid and optionally write `<output_path>.csv` and `<output_path>.params.json`.

    Args:
        name: Experiment name (see EXPERIMENTS)
        overrides: Parameter overrides on top of the defaults
        seed: Master seed
        output_path: Output prefix, or None to keep results in memory only
        paper_scale: Start from the published grid instead of the desk-scale one
        workers: Worker processes (1 runs in-process)
        progress: Show a progress bar

    Returns:
        ExperimentResult with rows ordered by (trial, grid point)
    """
    params = resolve_params(name, overrides, paper_scale)
    tasks = _tasks(name, params, seed)
    logger.info("Running %s: %d tasks, seed %d, workers %d", name, len(tasks), seed, workers)
    started = time.time()
    result = ExperimentResult(name, params, seed)
    with tqdm(total=len(tasks), desc=name, unit="task", disable=not progress) as bar:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for rows in pool.map(_call, tasks):
                    result.rows.extend(rows)
                    bar.update(1)
        else:
            for task in tasks:
                result.rows.extend(task())
                bar.update(1)
    logger.info("%s finished in %.1fs with %d rows", name, time.time() - started, len(result.rows))

    if output_path is not None:
        directory = os.path.dirname(output_path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        result.write_csv(output_path + ".csv")
        result.write_params(output_path + ".params.json")
    return result
