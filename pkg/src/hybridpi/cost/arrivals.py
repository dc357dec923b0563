"""Discrete-event model of precompute buffering under Poisson arrivals.

One precompute pipeline produces bundles back to back (L_off each) while the
client buffer holds fewer than K = floor(C / bundle_size). Each inference
request takes a bundle; if none is ready it waits for the next completion.
Latency = wait + L_on.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace

import numpy as np

from ..errors import ConfigError

_ARRIVAL, _DONE = 1, 0  # completions sort first at equal times


@dataclass(frozen=True)
class ArrivalSimConfig:
    rate: float
    offline_latency: float
    online_latency: float
    storage_cap: float
    bundle_size: float
    horizon: float
    seed: int = 0
    prefill: bool = True
    max_arrivals: int | None = None

    def __post_init__(self):
        for name in ("rate", "offline_latency", "horizon", "bundle_size", "storage_cap"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.online_latency < 0:
            raise ConfigError("online_latency must be non-negative")
        if self.capacity < 1:
            raise ConfigError(
                f"bundle of {self.bundle_size:g} bytes does not fit storage cap {self.storage_cap:g}: capacity 0")

    @property
    def capacity(self) -> int:
        return int(self.storage_cap // self.bundle_size)

    @property
    def load(self) -> float:
        return self.rate * self.offline_latency


@dataclass
class ArrivalSimResult:
    latencies: np.ndarray
    waits: np.ndarray
    arrivals: np.ndarray
    occupancy: list[tuple[float, int]]  # (time, ready bundles) after each event
    unstable: bool
    load: float
    online_latency: float = 0.0

    @property
    def mean(self) -> float:
        # L_on + mean wait, so an all-zero wait vector gives exactly L_on
        return self.online_latency + float(self.waits.mean()) if self.waits.size else float("nan")

    @property
    def p50(self) -> float:
        return float(np.percentile(self.latencies, 50)) if self.latencies.size else float("nan")

    @property
    def p95(self) -> float:
        return float(np.percentile(self.latencies, 95)) if self.latencies.size else float("nan")

    @property
    def wait_growth(self) -> float:
        """Mean wait of the second half of requests minus the first half."""
        n = len(self.waits)
        if n < 4:
            return 0.0
        return float(self.waits[n // 2:].mean() - self.waits[: n // 2].mean())

    def summary(self) -> dict:
        return {"requests": int(self.latencies.size), "mean": self.mean, "p50": self.p50,
                "p95": self.p95, "load": self.load, "unstable": self.unstable,
                "wait_growth": self.wait_growth}


def arrival_times(config: ArrivalSimConfig) -> np.ndarray:
    """Poisson arrival times from unit-rate exponentials scaled by 1/rate.

    The unit draws depend only on the seed, so sweeps over the rate use
    common random numbers.
    """
    gen = np.random.default_rng(config.seed)
    times: list[np.ndarray] = []
    total = 0.0
    count = 0
    chunk = max(16, int(config.rate * config.horizon * 1.2) + 16)
    while True:
        gaps = gen.exponential(1.0, size=chunk) / config.rate
        t = total + np.cumsum(gaps)
        times.append(t)
        total = float(t[-1])
        count += chunk
        if total >= config.horizon or (config.max_arrivals and count >= config.max_arrivals):
            break
    out = np.concatenate(times)
    out = out[out < config.horizon]
    if config.max_arrivals is not None:
        out = out[: config.max_arrivals]
    return out


def arrival_sim(config: ArrivalSimConfig) -> ArrivalSimResult:
    K = config.capacity
    arrivals = arrival_times(config)
    events: list[tuple[float, int, int]] = [(float(t), _ARRIVAL, i) for i, t in enumerate(arrivals)]
    heapq.heapify(events)
    ready = K if config.prefill else 0
    busy = False
    waiting: list[int] = []  # FIFO of request indices
    wait_head = 0
    waits = np.zeros(len(arrivals))
    occupancy: list[tuple[float, int]] = [(0.0, ready)]

    def start(now: float) -> None:
        nonlocal busy
        busy = True
        heapq.heappush(events, (now + config.offline_latency, _DONE, -1))

    if ready < K:
        start(0.0)
    while events:
        now, kind, idx = heapq.heappop(events)
        if kind == _DONE:
            busy = False
            if wait_head < len(waiting):
                j = waiting[wait_head]
                wait_head += 1
                waits[j] = now - arrivals[j]
            else:
                ready += 1
        elif ready > 0:
            ready -= 1
        else:
            waiting.append(idx)
        # the pipeline runs whenever the buffer is not full
        if not busy and ready < K:
            start(now)
        occupancy.append((now, ready))
    latencies = waits + config.online_latency
    return ArrivalSimResult(latencies, waits, arrivals, occupancy, config.load > 1.0, config.load,
                            config.online_latency)


def arrival_recurrence(config: ArrivalSimConfig) -> np.ndarray:
    """Closed recurrence for the same system (independent oracle).

    Job m completes at c_m = max(c_{m-1}, t_m) + L_off, where t_m is the moment
    the buffer first has room for it: arrival m with a prefilled buffer,
    else time 0 for m < K and arrival m - K after that. Request n is served
    by job n - K (prefilled) or n, and waits max(0, c_job - a_n).
    """
    a = arrival_times(config)
    K = config.capacity
    base = K if config.prefill else 0
    waits = np.zeros(len(a))
    c = -np.inf
    completions: list[float] = []
    for n in range(len(a)):
        j = n - base
        while len(completions) <= j:
            m = len(completions)
            if config.prefill:
                trigger = a[m]
            else:
                trigger = 0.0 if m < K else a[m - K]
            c = max(c, trigger) + config.offline_latency
            completions.append(c)
        if j >= 0:
            waits[n] = max(0.0, completions[j] - a[n])
    return waits + config.online_latency


def rate_sweep(base: ArrivalSimConfig, rates, seeds) -> np.ndarray:
    """Mean latency for each (rate, seed), shape (len(rates), len(seeds))."""
    out = np.zeros((len(rates), len(seeds)))
    for i, lam in enumerate(rates):
        for j, s in enumerate(seeds):
            out[i, j] = arrival_sim(replace(base, rate=float(lam), seed=int(s))).mean
    return out
