"""Single-pass streaming training: progressive validation, concurrent data
prefetch, and lock-free multi-process updates against the shared weight store.

The parallel mode forks worker processes (POSIX only). Because the weight
store's backing buffer is an anonymous shared mmap, every fork shares the
same physical pages: workers update weights with no locks, and overlapping
writes are tolerated by design. Individual float32 stores are indivisible on
the supported platforms, so values are never torn, merely occasionally
overwritten. With one worker the update sequence is identical to the
sequential loop, byte for byte.
"""

from __future__ import annotations

import math
import multiprocessing as mp
import os
import sys
import threading
import time
import traceback
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import ContractError, HogwildWorkerError, ParseError, TrainAborted
from .features import InputSchema, parse_example
from .metrics import StreamingEvaluator, window_auc
from .model import WeightStore, backward_update, forward, predict_proba

DEFAULT_EVAL_WINDOW = 30000
IPC_CHUNK_LINES = 256


@dataclass
class TrainOptions:
    n_threads: int = 1
    prefetch_depth: int = 1
    eval_window: int = DEFAULT_EVAL_WINDOW
    sparse_updates: bool = True

    def __post_init__(self):
        if self.n_threads < 1:
            raise ContractError("n_threads must be >= 1")
        if self.prefetch_depth < 1:
            raise ContractError("prefetch_depth must be >= 1")


@dataclass
class TrainReport:
    examples_seen: int = 0
    parse_errors: int = 0
    progressive_logloss: float = float("nan")
    rolling_auc_series: list = field(default_factory=list)
    wall_time: float = 0.0
    throughput: float = 0.0

    def summary(self) -> str:
        return (
            f"examples={self.examples_seen} parse_errors={self.parse_errors}"
            f" logloss={self.progressive_logloss:.6f}"
            f" wall={self.wall_time:.2f}s throughput={self.throughput:.0f}/s"
        )


# --- example sources --------------------------------------------------------


def lines_from_file(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            yield from fh
    except OSError as exc:
        raise TrainAborted(f"I/O failure reading {path}: {exc}") from exc


def chunk_paths(directory) -> list:
    """Ordered chunk files of a directory source (lexicographic)."""
    names = sorted(n for n in os.listdir(directory) if not n.startswith("."))
    return [os.path.join(directory, n) for n in names]


def file_chunk_fetchers(directory):
    """One fetch thunk per chunk file; each returns the chunk's lines."""

    def make(path):
        def fetch():
            with open(path, "r", encoding="utf-8") as fh:
                return fh.readlines()

        return fetch

    return [make(p) for p in chunk_paths(directory)]


def open_source(spec: str, prefetch_depth: int = 1):
    """Build a line source from a path, a directory, or '-' for stdin."""
    if spec == "-":
        return iter(sys.stdin)
    if os.path.isdir(spec):
        return prefetch_source(file_chunk_fetchers(spec), prefetch_depth)
    return lines_from_file(spec)


class PrefetchGauge:
    """Tracks how many fetched chunks are resident in the prefetch buffer."""

    def __init__(self):
        self._lock = threading.Lock()
        self.loaded = 0
        self.peak = 0

    def inc(self):
        with self._lock:
            self.loaded += 1
            self.peak = max(self.peak, self.loaded)

    def dec(self):
        with self._lock:
            self.loaded -= 1


def prefetch_source(chunk_fetchers, depth: int, gauge: PrefetchGauge | None = None):
    """Fetch up to ``depth`` chunks concurrently ahead of the consumer.

    Chunks are handed out strictly in submission order regardless of fetch
    completion order, so the consumed example sequence is exactly the
    concatenation of the chunks. A failed fetch raises at the point its
    chunk would have been consumed. At most ``depth`` fetched chunks are
    buffered at any time.
    """
    if depth < 1:
        raise ContractError("prefetch depth must be >= 1")

    def generate():
        it = iter(chunk_fetchers)
        pending = deque()
        with ThreadPoolExecutor(max_workers=depth) as pool:

            def submit_next() -> bool:
                try:
                    fetch = next(it)
                except StopIteration:
                    return False

                def run():
                    lines = fetch()
                    if gauge is not None:
                        gauge.inc()
                    return lines

                pending.append(pool.submit(run))
                return True

            for _ in range(depth):
                if not submit_next():
                    break
            while pending:
                fut = pending.popleft()
                lines = fut.result()
                if gauge is not None:
                    gauge.dec()
                submit_next()
                yield from lines

    return generate()


# --- sequential loop ---------------------------------------------------------


def _train_lines(lines, store, schema, opts, evaluator, stats):
    """Shared predict-then-learn loop body; mutates ``stats`` as it goes."""
    sparse = opts.sparse_updates
    for line in lines:
        if not line.strip():
            continue
        try:
            example = parse_example(line, schema)
        except ParseError:
            stats["parse_errors"] += 1
            continue
        state = forward(example, store)
        evaluator.add(predict_proba(state.logit), example.label)
        backward_update(state, example, example.label, store, sparse=sparse)


def train_stream(
    source, store: WeightStore, schema: InputSchema, opts: TrainOptions | None = None
) -> TrainReport:
    """Train on a line source in order: score first, learn second.

    Progressive validation means no example influences its own prediction.
    Unparseable lines are counted and skipped, not fatal; an I/O failure
    aborts with the partial report attached to the exception.
    """
    opts = opts or TrainOptions()
    evaluator = StreamingEvaluator(opts.eval_window)
    stats = {"parse_errors": 0}
    start = time.perf_counter()

    def report() -> TrainReport:
        wall = time.perf_counter() - start
        return TrainReport(
            examples_seen=evaluator.count,
            parse_errors=stats["parse_errors"],
            progressive_logloss=evaluator.mean_logloss,
            rolling_auc_series=evaluator.auc_series,
            wall_time=wall,
            throughput=evaluator.count / wall if wall > 0 else 0.0,
        )

    try:
        _train_lines(source, store, schema, opts, evaluator, stats)
    except TrainAborted as exc:
        exc.partial_report = report()
        raise
    return report()


def evaluate_stream(source, store: WeightStore, schema: InputSchema):
    """Score a labeled stream without updating; returns (auc, logloss, n)."""
    scores = []
    labels = []
    loss_sum = 0.0
    for line in source:
        if not line.strip():
            continue
        example = parse_example(line, schema)
        p = predict_proba(forward(example, store).logit)
        scores.append(p)
        labels.append(example.label)
        loss_sum += -math.log(p) if example.label else -math.log1p(-p)
    if not scores:
        return None, float("nan"), 0
    return window_auc(scores, labels), loss_sum / len(scores), len(scores)


# --- lock-free parallel loop --------------------------------------------------


def _hogwild_worker(worker_id, task_q, result_q, stop, store, schema, opts):
    evaluator = StreamingEvaluator(opts.eval_window)
    stats = {"parse_errors": 0}
    error = None
    while True:
        chunk = task_q.get()
        if chunk is None:
            break
        if error is not None or stop.is_set():
            continue  # drain so the producer never blocks on a dead pool
        try:
            _train_lines(chunk, store, schema, opts, evaluator, stats)
        except Exception:
            error = traceback.format_exc()
            stop.set()
    result_q.put(
        {
            "worker_id": worker_id,
            "error": error,
            "count": evaluator.count,
            "loss_sum": evaluator.loss_sum,
            "parse_errors": stats["parse_errors"],
            "auc_series": evaluator.auc_series,
        }
    )


def hogwild_train(
    source, store: WeightStore, schema: InputSchema, opts: TrainOptions | None = None
) -> TrainReport:
    """Parallel single-pass training with lock-free shared-weight updates.

    Workers pull line chunks from a bounded queue and run the same
    predict-then-learn loop as :func:`train_stream` against the shared
    store. No locks guard the weights; concurrent updates may overwrite
    each other. Metric partials are per-worker and merged at the end; the
    rolling AUC series is only meaningful (and only reported) for one
    worker, where the output is byte-identical to the sequential loop.
    """
    opts = opts or TrainOptions()
    n = opts.n_threads
    ctx = mp.get_context("fork")
    task_q = ctx.Queue(maxsize=4 * n)
    result_q = ctx.Queue()
    stop = ctx.Event()
    workers = [
        ctx.Process(
            target=_hogwild_worker,
            args=(i, task_q, result_q, stop, store, schema, opts),
            daemon=True,
        )
        for i in range(n)
    ]
    start = time.perf_counter()
    for w in workers:
        w.start()

    chunk: list[str] = []
    try:
        for line in source:
            chunk.append(line)
            if len(chunk) >= IPC_CHUNK_LINES:
                task_q.put(chunk)
                chunk = []
                if stop.is_set():
                    break
        if chunk:
            task_q.put(chunk)
    finally:
        for _ in workers:
            task_q.put(None)

    results = [result_q.get() for _ in workers]
    for w in workers:
        w.join()
    wall = time.perf_counter() - start
    store.mark_mutated()  # worker bumps happened in other processes

    results.sort(key=lambda r: r["worker_id"])
    failed = next((r for r in results if r["error"]), None)
    if failed is not None:
        raise HogwildWorkerError(
            f"worker {failed['worker_id']} failed:\n{failed['error']}",
            worker_id=failed["worker_id"],
        )
    seen = sum(r["count"] for r in results)
    loss_sum = sum(r["loss_sum"] for r in results)
    return TrainReport(
        examples_seen=seen,
        parse_errors=sum(r["parse_errors"] for r in results),
        progressive_logloss=loss_sum / seen if seen else float("nan"),
        rolling_auc_series=results[0]["auc_series"] if n == 1 else [],
        wall_time=wall,
        throughput=seen / wall if wall > 0 else 0.0,
    )
