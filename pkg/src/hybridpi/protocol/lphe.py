"""Server-side offline HE jobs, one per linear layer, run on a process pool.

Each job only touches its own layer's inputs (E(r_i), W_i, s_i), so the
jobs can run in any order or concurrently; results are bit-identical to
sequential execution because every job carries its own randomness seed.
"""

from __future__ import annotations

import multiprocessing
import threading
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import NoiseOverflowError
from ..he import Ciphertext, MatvecPlan, Packing, PlaintextVector, ct_add, matvec_blocks
from ..params import HeParams
from ..rng import Rng


@dataclass(frozen=True)
class HeJob:
    layer: int
    params: HeParams
    weight: np.ndarray  # rows x cols over Z_p
    inputs: tuple[bytes, ...]  # serialized E(r_i) column blocks
    s: np.ndarray  # server mask for this layer's output
    mask_seed: bytes


@dataclass(frozen=True)
class HeJobResult:
    layer: int
    outputs: tuple[bytes, ...]
    noise_bound: int


def run_he_job(job: HeJob) -> HeJobResult:
    """E(W r - s), with fresh random plaintext on every non-output coefficient.

    The random fill hides the partial inner products that coefficient
    packing leaves in the other positions. Input ciphertexts are assumed
    fresh (noise bound eta).
    """
    params = job.params
    p, n = params.p, params.n
    rows, cols = job.weight.shape
    plan = MatvecPlan.for_shape(rows, cols, n)
    cts = [Ciphertext.from_bytes(b, params, noise_bound=params.eta) for b in job.inputs]
    products = matvec_blocks(job.weight, cts, plan)
    rng = Rng(job.mask_seed)
    s = np.asarray(job.s, dtype=np.int64)
    outputs, worst = [], 0
    for k, ct in enumerate(products):
        fill = rng.below(p, n).astype(np.int64)
        fill[plan.output_packing(k).indices()] = (-s[plan.row_slice(k)]) % p
        out = ct_add(ct, PlaintextVector(fill, Packing(n)))
        if not params.noise_ok(out.noise_bound):
            raise NoiseOverflowError(
                f"layer {job.layer}: noise bound 2^{out.noise_bits:.1f} leaves no decryption margin",
                job.layer,
            )
        worst = max(worst, out.noise_bound)
        outputs.append(out.to_bytes())
    return HeJobResult(job.layer, tuple(outputs), worst)


_POOLS: dict[int, ProcessPoolExecutor] = {}
_POOL_LOCK = threading.Lock()


def _context():
    methods = multiprocessing.get_all_start_methods()
    return multiprocessing.get_context("forkserver" if "forkserver" in methods else "spawn")


def worker_pool(workers: int) -> ProcessPoolExecutor:
    """Shared executor per worker count, created on first use."""
    with _POOL_LOCK:
        pool = _POOLS.get(workers)
        if pool is None:
            pool = ProcessPoolExecutor(max_workers=workers, mp_context=_context())
            _POOLS[workers] = pool
        return pool


def warm_pool(workers: int) -> None:
    """Start every worker process and import the package in it."""
    if workers > 1:
        pool = worker_pool(workers)
        list(pool.map(_ping, range(4 * workers)))


def _ping(i: int) -> int:
    return i


def shutdown_pools() -> None:
    with _POOL_LOCK:
        for pool in _POOLS.values():
            pool.shutdown(wait=True, cancel_futures=True)
        _POOLS.clear()


def lphe_schedule(jobs: list[HeJob], workers: int = 1) -> list[HeJobResult]:
    """Run every layer's job; with workers > 1, concurrently on a process pool.

    Results come back in job order whatever the completion order.
    """
    if workers < 1:
        raise ValueError("worker count must be at least 1")
    if workers == 1 or len(jobs) <= 1:
        return [run_he_job(job) for job in jobs]
    return list(worker_pool(workers).map(run_he_job, jobs))
