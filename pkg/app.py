#!/usr/bin/env python3
"""
Hyperdimensional Computing Toolkit

Command-line front end for the Multiply-Add-Permute toolkit in libs/:
1. Run the accuracy-vs-dimension experiments and write their CSVs
2. Encode sets, multisets, sequences and n-gram statistics into hypervectors
3. Probe encoded data structures (sets, sequences, graphs, trees, stacks, automata)
4. Factorize bind-products with a resonator network
5. Search substrings in superposition
6. Emulate a Turing machine and the rule-110 cellular automaton

Experiment runs are recorded in a SQLite database for tracking and future reference.
"""

import argparse
import hashlib
import json
import logging
import os
import sqlite3
import sys
import time
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence, Tuple

from colorama import Fore, Style

# Add the libs directory to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "libs"))

import encoders
import experiments
import substring_search
import universal
from hypervectors import HDCError, Rng, normalize, save_vectors
from item_memory import ItemMemory
from resonator import brute_force_factorize, factorize, random_problem

logger = logging.getLogger("app")

DB_PATH = os.path.join("data", "db", "hdc_runs.db")
LOG_PATH = os.path.join("data", "logs", "app.log")
EXPERIMENTS_DIR = os.path.join("data", "output", "experiments")


def setup_database() -> sqlite3.Connection:
    """
    Create and set up the SQLite database for storing experiment runs.

    Returns:
        A connection to the SQLite database
    """
    os.makedirs(os.path.dirname(DB_PATH), exist_ok=True)

    conn = sqlite3.connect(DB_PATH)
    cursor = conn.cursor()

    cursor.execute('''
    CREATE TABLE IF NOT EXISTS experiment_runs (
        id INTEGER PRIMARY KEY AUTOINCREMENT,
        experiment TEXT,
        parameters TEXT,
        seed INTEGER,
        run_date TEXT,
        output_path TEXT,
        output_md5 TEXT,
        row_count INTEGER,
        wall_time REAL
    )
    ''')

    conn.commit()
    return conn


def setup_logging(verbose: bool = False) -> None:
    os.makedirs(os.path.dirname(LOG_PATH), exist_ok=True)
    handlers: List[logging.Handler] = [logging.FileHandler(LOG_PATH, encoding="utf-8")]
    if verbose:
        handlers.append(logging.StreamHandler(sys.stderr))
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        handlers=handlers,
        force=True,
    )


def calculate_md5(file_path: str) -> str:
    """
    Calculate MD5 hash of a file.

    Args:
        file_path: Path to the file

    Returns:
        MD5 hash as a hexadecimal string
    """
    hash_md5 = hashlib.md5()
    with open(file_path, "rb") as f:
        for chunk in iter(lambda: f.read(4096), b""):
            hash_md5.update(chunk)
    return hash_md5.hexdigest()


def banner(title: str) -> None:
    print(f"\n{'='*60}")
    print(title)
    print(f"{'='*60}")


def status(message: str, colour: str = Fore.GREEN) -> None:
    print(f"{colour}{message}{Style.RESET_ALL}")


def split_items(text: str) -> List[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def codebook_for(names: Sequence[str], dim: int, rng: Rng) -> ItemMemory:
    """Item memory over the distinct names, in first-seen order."""
    return ItemMemory.random(list(dict.fromkeys(names)), dim, rng)


def parse_param(text: str) -> Tuple[str, Any]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got '{text}'")
    key, value = text.split("=", 1)
    try:
        return key.strip(), json.loads(value)
    except json.JSONDecodeError:
        return key.strip(), value


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------

def run_experiment_command(conn: sqlite3.Connection, args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    overrides: Dict[str, Any] = dict(args.param or [])
    try:
        if args.dims:
            overrides["dims"] = experiments.parse_dims(args.dims)
        elif args.dim is not None:
            overrides["dims"] = [args.dim]
        if args.trials is not None:
            overrides["trials"] = args.trials
        if args.noise is not None:
            overrides["noise"] = args.noise
        params = experiments.resolve_params(args.name, overrides, args.paper_scale)
    except HDCError as e:
        parser.error(str(e))

    output_path = args.out or os.path.join(EXPERIMENTS_DIR, f"{args.name}_seed{args.seed}_{int(time.time())}")
    banner(f"Running experiment {args.name} (seed {args.seed}{', paper scale' if args.paper_scale else ''})")
    started = time.time()
    result = experiments.run_experiment(
        args.name,
        overrides,
        seed=args.seed,
        output_path=output_path,
        paper_scale=args.paper_scale,
        workers=args.workers,
        progress=True,
    )
    wall_time = time.time() - started
    csv_path = output_path + ".csv"

    print(f"\n{'Series':<40} {'X':<12} {'Metric':<12} {'Mean':<10}")
    print("-" * 80)
    for series, x_value, metric, mean in result.summary():
        print(f"{series:<40} {x_value!s:<12} {metric:<12} {mean:<10.4f}")
    status(f"\n{len(result.rows)} rows written to {csv_path} ({wall_time:.1f}s)")

    cursor = conn.cursor()
    try:
        cursor.execute(
            '''
            INSERT INTO experiment_runs
            (experiment, parameters, seed, run_date, output_path, output_md5, row_count, wall_time)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?)
            ''',
            (
                args.name,
                json.dumps(params, sort_keys=True),
                args.seed,
                datetime.now().isoformat(),
                csv_path,
                calculate_md5(csv_path),
                len(result.rows),
                wall_time,
            )
        )
        conn.commit()
    except sqlite3.Error as e:
        logger.warning("Could not record run in %s: %s", DB_PATH, e)
        status(f"Error saving to database: {e}", Fore.YELLOW)


# ---------------------------------------------------------------------------
# encode / probe
# ---------------------------------------------------------------------------

def encode_command(args: argparse.Namespace) -> None:
    rng = Rng(args.seed)
    banner(f"Encoding {args.kind} at dim {args.dim}")
    if args.kind == "ngram":
        if not args.file:
            raise HDCError("ngram encoding needs --file")
        with open(args.file, "r", encoding="utf-8") as f:
            text = f.read().strip()
        symbols = text.split()
        if len(symbols) < args.n:
            raise HDCError(f"{args.file} has {len(symbols)} tokens, fewer than n = {args.n}")
        cb = codebook_for(sorted(set(symbols)), args.dim, rng.split(0))
        acc = encoders.encode_ngram_stats(cb, symbols, args.n)
        print(f"{len(symbols) - args.n + 1} {args.n}-grams over {len(cb)} symbols")
    elif args.kind == "multiset":
        counts = {}
        for item in split_items(args.items):
            name, _, count = item.partition(":")
            if count and not count.isdigit():
                raise HDCError(f"Multiset counts must be non-negative integers, got '{item}'")
            counts[name] = int(count) if count else 1
        cb = codebook_for(list(counts), args.dim, rng.split(0))
        acc = encoders.encode_multiset(cb, counts)
        estimates = encoders.decode_multiset_counts(acc, cb)
        print(f"{'Symbol':<15} {'Count':<10} {'Estimate':<10}")
        print("-" * 35)
        for name in cb.names:
            print(f"{name:<15} {counts[name]:<10} {estimates[name]:<10}")
    else:
        items = split_items(args.items)
        cb = codebook_for(items, args.dim, rng.split(0))
        if args.kind == "set":
            acc = encoders.encode_set(cb, items)
        else:
            acc = encoders.encode_sequence_sum(cb, items)
        for match in cb.rank(acc, k=min(len(cb), 10)):
            print(f"{match.name:<15} {match.score}")

    print(f"Accumulator weight {acc.weight}, max |component| {acc.max_abs()}")
    if args.out:
        save_vectors(args.out, list(cb) + [(f"__{args.kind}__", normalize(acc, cb.tiebreak))], args.dim, cb.tiebreak_seed)
        status(f"Codebook and encoding written to {args.out}")


def parse_leaves(text: str) -> List[Tuple[encoders.TreePath, str]]:
    leaves = []
    for item in split_items(text):
        path, sep, leaf = item.partition("=")
        if not sep:
            raise HDCError(f"Tree leaves must be path=leaf, got '{item}'")
        leaves.append((encoders.TreePath.parse(path), leaf.strip()))
    return leaves


def parse_edges(text: str) -> List[Tuple[str, str]]:
    edges = []
    for item in split_items(text):
        u, sep, v = item.partition("-")
        if not sep:
            raise HDCError(f"Edges must be u-v, got '{item}'")
        edges.append((u.strip(), v.strip()))
    return edges


def probe_command(args: argparse.Namespace) -> None:
    rng = Rng(args.seed)
    banner(f"Probing {args.kind} at dim {args.dim}")
    if args.kind == "set":
        items = split_items(args.items)
        cb = codebook_for(items + [args.query], args.dim, rng.split(0))
        acc = encoders.encode_set(cb, items)
        member = encoders.is_member(acc, cb, args.query)
        print(f"{args.query}: {'member' if member else 'not a member'}")
    elif args.kind == "sequence":
        items = split_items(args.items)
        cb = codebook_for(items, args.dim, rng.split(0))
        acc = encoders.encode_sequence_sum(cb, items)
        print(f"position {args.position}: {encoders.probe_position(acc, args.position, len(items), cb)}")
    elif args.kind == "graph":
        edges = parse_edges(args.edges)
        cb = codebook_for([v for edge in edges for v in edge], args.dim, rng.split(0))
        g = encoders.encode_graph(cb, edges, directed=args.directed)
        for match in encoders.graph_neighbors(g, args.query, cb, k=args.k, directed=args.directed):
            print(f"{match.name:<15} {match.score}")
    elif args.kind == "tree":
        leaves = parse_leaves(args.leaves)
        role_cb = encoders.make_role_codebook(args.dim, rng.split(0))
        leaf_cb = codebook_for([leaf for _, leaf in leaves], args.dim, rng.split(1))
        t = encoders.encode_binary_tree(role_cb, leaf_cb, leaves)
        path = encoders.TreePath.parse(args.query)
        print(f"{path}: {encoders.tree_leaf_lookup(t, path, role_cb, leaf_cb)}")
    elif args.kind == "stack":
        items = split_items(args.items)
        cb = codebook_for(items, args.dim, rng.split(0))
        st = encoders.StackState.empty(args.dim)
        for item in items:
            st = encoders.stack_push(st, item, cb)
        popped = []
        while st.depth:
            name, st = encoders.stack_pop(st, cb)
            popped.append(name)
        print(f"popped: {' '.join(popped)}")
    elif args.kind == "fsa":
        if args.table:
            with open(args.table, "r", encoding="utf-8") as f:
                desc = encoders.load_fsa(f.read())
        else:
            desc = encoders.turnstile()
        state_cb = ItemMemory.random(desc.states, args.dim, rng.split(0))
        sym_cb = ItemMemory.random(desc.symbols, args.dim, rng.split(1))
        a = encoders.fsa_encode(desc, state_cb, sym_cb)
        final, accepting = encoders.fsa_run(a, desc, state_cb, sym_cb, split_items(args.items))
        print(f"final state: {final} ({'accepting' if accepting else 'not accepting'})")


# ---------------------------------------------------------------------------
# factorize / search / emulate
# ---------------------------------------------------------------------------

def factorize_command(args: argparse.Namespace) -> None:
    banner(f"Factorizing a {args.factors}-factor product ({args.size} entries per codebook, dim {args.dim})")
    problem, truth = random_problem(args.factors, args.size, args.dim, Rng(args.seed), args.max_iters)
    result = factorize(problem)
    print(f"True factors:      {' '.join(truth)}")
    print(f"Resonator factors: {' '.join(result.factors)}")
    print(f"Iterations: {result.iterations}, converged: {result.converged}")
    if args.brute_force:
        solutions = brute_force_factorize(problem.input, problem.codebooks)
        print(f"Brute-force solutions: {[' '.join(s) for s in solutions]}")
    if result.converged and result.factors == truth:
        status("Factorization recovered the true factors")
    else:
        status("Factorization did not recover the true factors", Fore.YELLOW)


def search_command(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    rng = Rng(args.seed)
    if args.batch:
        batch = substring_search.read_batch(args.batch)
    elif args.base and args.query:
        batch = [substring_search.BatchQuery(args.base, args.query, None)]
    else:
        parser.error("search needs --base and --query, or --batch")

    banner(f"Substring search ({args.variant} variant, dim {args.dim})")
    agreed = 0
    for i, item in enumerate(batch):
        sa = substring_search.build_string_automaton(item.base, args.dim, rng.split(i))
        threshold = args.threshold
        if args.calibrate:
            threshold = substring_search.calibrate_threshold(
                sa, rng.split(i, 1), args.calibrate, args.variant, query_len=len(item.query)
            )
        outcome = substring_search.run_query(sa, item.query, threshold, args.variant)
        expected = item.expected
        if expected is None:
            expected = bool(substring_search.naive_find(item.base, item.query))
        agreed += outcome.present == expected
        verdict = "present" if outcome.present else "absent"
        where = f" ending at {', '.join(map(str, outcome.positions))}" if outcome.positions else ""
        print(f"{item.query!r} in {item.base!r}: {verdict}{where} (score {outcome.score})")
    if len(batch) > 1:
        status(f"\nAgreement with expected answers: {agreed}/{len(batch)}")


def emulate_command(args: argparse.Namespace) -> None:
    rng = Rng(args.seed)
    if args.machine == "tm":
        if args.table:
            with open(args.table, "r", encoding="utf-8") as f:
                table = universal.load_behaviour_table(f.read())
        else:
            table = universal.default_behaviour_table()
        banner(f"Emulating a Turing machine for {args.steps} steps (dim {args.dim}, BER {args.noise})")
        m = universal.tm_build(table, args.dim, rng.split(0))
        oracle = universal.SymbolicTuringMachine(table)
        run = universal.tm_run(m, universal.tm_initial_tape(m), args.steps, args.noise, rng.split(1), oracle=oracle)
        symbols, head, state = universal.decode_tape(run.tape, m)
        expected_cells, expected_head = oracle.cells()
        print(f"Emulated: {universal.format_tape(symbols, head, state)}")
        print(f"Oracle:   {universal.format_tape(expected_cells, expected_head, oracle.state)}")
        if run.first_divergence is None:
            status("Emulation matches the oracle")
        else:
            status(f"Emulation diverged from the oracle at step {run.first_divergence}", Fore.YELLOW)
    else:
        if args.rule_file:
            with open(args.rule_file, "r", encoding="utf-8") as f:
                rule = universal.load_ca_rule(f.read())
        else:
            rule = args.rule
        bits = universal.parse_bits(args.grid)
        banner(f"Emulating rule {rule} on {len(bits)} cells for {args.steps} steps (dim {args.dim}, BER {args.noise})")
        m = universal.ca_build(rule, args.dim, rng.split(0))
        final = universal.ca_run(universal.ca_encode_grid(bits, m), m, args.steps, args.noise, rng.split(1))
        emulated = universal.ca_decode_grid(final, m)
        expected = bits
        for _ in range(args.steps):
            expected = universal.eca_step(expected, rule)
        print(f"Emulated: {universal.format_bits(emulated)}")
        print(f"Oracle:   {universal.format_bits(expected)}")
        mismatches = sum(int(a != b) for a, b in zip(emulated, expected))
        if mismatches == 0:
            status("Emulation matches the oracle")
        else:
            status(f"{mismatches} of {len(bits)} cells differ from the oracle", Fore.YELLOW)


def list_runs(conn: sqlite3.Connection) -> None:
    cursor = conn.cursor()
    cursor.execute('''
        SELECT id, experiment, seed, run_date, row_count, wall_time, output_path
        FROM experiment_runs
        ORDER BY run_date DESC
    ''')
    results = cursor.fetchall()

    if not results:
        print("No experiment runs found in the database.")
        return
    print("\nExperiment Runs:")
    print(f"{'ID':<5} {'Experiment':<20} {'Seed':<8} {'Date':<28} {'Rows':<8} {'Seconds':<10} {'Output':<30}")
    print("-" * 110)
    for id, experiment, seed, run_date, row_count, wall_time, output_path in results:
        print(f"{id:<5} {experiment:<20} {seed:<8} {run_date:<28} {row_count:<8} {wall_time:<10.1f} {os.path.basename(output_path):<30}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Hyperdimensional computing toolkit: encoders, resonator, substring search and emulations"
    )
    parser.add_argument("--verbose", action="store_true", help="Echo log messages to stderr")

    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    # Experiment parser
    exp_parser = subparsers.add_parser("experiment", help="Run an accuracy-vs-dimension experiment")
    exp_parser.add_argument("name", choices=experiments.EXPERIMENTS, help="Experiment to run")
    exp_parser.add_argument("--dim", type=int, help="Run a single dimension")
    exp_parser.add_argument("--dims", help="Dimension grid start:end:step (or start:end:xF for powers)")
    exp_parser.add_argument("--seed", type=int, default=0, help="Master seed (default: 0)")
    exp_parser.add_argument("--trials", type=int, help="Number of trials")
    exp_parser.add_argument("--noise", type=float, nargs="+", help="Bit error rate(s)")
    exp_parser.add_argument("--out", help="Output prefix for <out>.csv and <out>.params.json")
    exp_parser.add_argument("--paper-scale", action="store_true", help="Use the published grid sizes")
    exp_parser.add_argument("--param", type=parse_param, action="append", help="Override a parameter (key=value, JSON)")
    exp_parser.add_argument("--workers", type=int, default=1, help="Worker processes (default: 1)")

    # Encode parser
    enc_parser = subparsers.add_parser("encode", help="Encode data into a hypervector")
    enc_parser.add_argument("kind", choices=["set", "multiset", "sequence", "ngram"])
    enc_parser.add_argument("--items", default="", help="Comma-separated symbols (multiset: name:count)")
    enc_parser.add_argument("--file", help="Whitespace-separated token file for n-gram statistics")
    enc_parser.add_argument("--n", type=int, default=3, help="n-gram size (default: 3)")
    enc_parser.add_argument("--dim", type=int, default=10000)
    enc_parser.add_argument("--seed", type=int, default=0)
    enc_parser.add_argument("--out", help="Write the codebook and the normalized encoding to this file")

    # Probe parser
    probe_parser = subparsers.add_parser("probe", help="Encode a data structure and query it")
    probe_parser.add_argument("kind", choices=["set", "sequence", "graph", "tree", "stack", "fsa"])
    probe_parser.add_argument("--items", default="", help="Comma-separated symbols (fsa: input string)")
    probe_parser.add_argument("--edges", default="", help="Comma-separated u-v edges")
    probe_parser.add_argument("--leaves", default="", help="Comma-separated path=leaf pairs, paths like rl")
    probe_parser.add_argument("--query", default="", help="Symbol, vertex or tree path to query")
    probe_parser.add_argument("--position", type=int, default=1, help="1-based sequence position to read")
    probe_parser.add_argument("--directed", action="store_true")
    probe_parser.add_argument("--k", type=int, default=2, help="Neighbours to report")
    probe_parser.add_argument("--table", help="Automaton table file (default: turnstile)")
    probe_parser.add_argument("--dim", type=int, default=10000)
    probe_parser.add_argument("--seed", type=int, default=0)

    # Factorize parser
    fac_parser = subparsers.add_parser("factorize", help="Factorize a random bind-product")
    fac_parser.add_argument("--factors", type=int, default=3)
    fac_parser.add_argument("--size", type=int, default=8, help="Entries per codebook")
    fac_parser.add_argument("--dim", type=int, default=2048)
    fac_parser.add_argument("--max-iters", type=int, default=200)
    fac_parser.add_argument("--brute-force", action="store_true", help="Also list exhaustive solutions")
    fac_parser.add_argument("--seed", type=int, default=0)

    # Search parser
    search_parser = subparsers.add_parser("search", help="Substring search in superposition")
    search_parser.add_argument("--base")
    search_parser.add_argument("--query")
    search_parser.add_argument("--batch", help="Tab-separated base/query/expected file")
    search_parser.add_argument("--variant", choices=substring_search.VARIANTS, default=substring_search.VARIANT_CLEANUP)
    search_parser.add_argument("--threshold", type=int, help="Detection threshold (default: N/2)")
    search_parser.add_argument("--calibrate", type=int, metavar="TRIALS", help="Calibrate the threshold on negative queries")
    search_parser.add_argument("--dim", type=int, default=8192)
    search_parser.add_argument("--seed", type=int, default=0)

    # Emulate parser
    emu_parser = subparsers.add_parser("emulate", help="Emulate a Turing machine or an elementary CA")
    emu_parser.add_argument("machine", choices=["tm", "ca"])
    emu_parser.add_argument("--steps", type=int, default=100)
    emu_parser.add_argument("--noise", type=float, default=0.0, help="Bit error rate")
    emu_parser.add_argument("--dim", type=int, default=1024)
    emu_parser.add_argument("--table", help="Behaviour table file (tm)")
    emu_parser.add_argument("--rule", type=int, default=110, help="Rule number (ca)")
    emu_parser.add_argument("--rule-file", help="Rule table file (ca)")
    emu_parser.add_argument("--grid", default="00000000000000000000000000000001", help="Initial cells (ca)")
    emu_parser.add_argument("--seed", type=int, default=0)

    # Database parser
    db_parser = subparsers.add_parser("db", help="Database operations")
    db_parser.add_argument("--list", action="store_true", help="List all experiment runs")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the script."""
    parser = build_parser()
    args = parser.parse_args(argv)

    # If no command is specified, show help
    if not args.command:
        parser.print_help()
        return 0

    setup_logging(args.verbose)
    conn = setup_database()

    try:
        if args.command == "experiment":
            run_experiment_command(conn, args, parser)
        elif args.command == "encode":
            encode_command(args)
        elif args.command == "probe":
            probe_command(args)
        elif args.command == "factorize":
            factorize_command(args)
        elif args.command == "search":
            search_command(args, parser)
        elif args.command == "emulate":
            emulate_command(args)
        elif args.command == "db" and args.list:
            list_runs(conn)
    except (HDCError, OSError) as e:
        logger.error("%s failed: %s", args.command, e)
        print(f"{Fore.RED}Error: {e}{Style.RESET_ALL}", file=sys.stderr)
        return 1
    finally:
        # Close the database connection
        conn.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
