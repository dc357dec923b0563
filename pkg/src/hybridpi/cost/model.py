"""Analytic storage, communication and latency model for hybrid PI.

Communication is modeled as sequential directions sharing one link of
bandwidth B: T(alpha) = (U*8/(alpha*B) + D*8/((1-alpha)*B)) / eta, where alpha
is the uplink share and eta a link-efficiency factor (1.0 = raw rate).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

from scipy.optimize import minimize_scalar

from ..errors import ConfigError

KB = 1000
GB = 1000 ** 3


@dataclass(frozen=True)
class WorkloadProfile:
    name: str = "workload"
    relu_count: float = 0.0
    per_relu_garbler_bytes: float = 3.5 * KB
    per_relu_evaluator_bytes: float = 18.2 * KB
    linear_layers: int = 1
    he_seconds: float = 0.0  # sequential server HE time
    he_parallel_seconds: float | None = None  # measured LPHE time, if known
    gc_garble_seconds: float = 0.0  # garbling on the server
    gc_eval_seconds: float = 0.0  # evaluation on the client
    garble_eval_cost_ratio: float = 2.0  # hash calls per AND: 4 to garble, 2 to evaluate
    online_ss_seconds: float = 0.0
    client_garbler_upload_fraction: float | None = None  # measured traffic shape

    def __post_init__(self):
        for name in ("relu_count", "per_relu_garbler_bytes", "per_relu_evaluator_bytes",
                     "he_seconds", "gc_garble_seconds", "gc_eval_seconds", "online_ss_seconds"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.linear_layers < 1:
            raise ConfigError("linear_layers must be at least 1")
        f = self.client_garbler_upload_fraction
        if f is not None and not 0 < f < 1:
            raise ConfigError("upload fraction must be in (0, 1)")

    @property
    def gc_bytes(self) -> float:
        """Tables shipped garbler -> evaluator for one inference."""
        return self.relu_count * self.per_relu_evaluator_bytes

    @property
    def client_device_slowdown(self) -> float:
        """Client time / server time for the same GC work."""
        if self.gc_garble_seconds == 0:
            return 1.0
        server_eval = self.gc_garble_seconds / self.garble_eval_cost_ratio
        return self.gc_eval_seconds / server_eval


@dataclass(frozen=True)
class LinkProfile:
    bandwidth_bps: float = 1e9
    alpha0: float = 0.5
    efficiency: float = 1.0

    def __post_init__(self):
        if self.bandwidth_bps <= 0:
            raise ConfigError("bandwidth must be positive")
        if not 0 < self.alpha0 < 1:
            raise ConfigError("alpha0 must be in (0, 1)")
        if not 0 < self.efficiency <= 1:
            raise ConfigError("link efficiency must be in (0, 1]")


def storage_cost(workload: WorkloadProfile, variant: str) -> dict[str, float]:
    """Persistent bytes per role for one precomputed inference."""
    v = variant.replace("-", "_")
    garbler = workload.relu_count * workload.per_relu_garbler_bytes
    evaluator = workload.relu_count * workload.per_relu_evaluator_bytes
    if v == "server_garbler":
        return {"client": evaluator, "server": garbler}
    if v == "client_garbler":
        return {"client": garbler, "server": evaluator}
    raise ConfigError(f"unknown variant {variant!r}")


def comm_latency(link: LinkProfile, bytes_up: float, bytes_down: float, alpha: float | None = None) -> float:
    alpha = link.alpha0 if alpha is None else alpha
    if not 0 < alpha < 1:
        raise ConfigError(f"uplink share alpha={alpha} must be in (0, 1)")
    if bytes_up < 0 or bytes_down < 0:
        raise ConfigError("byte counts must be non-negative")
    raw = 8 * bytes_up / (alpha * link.bandwidth_bps) + 8 * bytes_down / ((1 - alpha) * link.bandwidth_bps)
    return raw / link.efficiency


@dataclass(frozen=True)
class WsaResult:
    alpha: float
    alpha_search: float
    latency: float
    latency_alpha0: float
    alpha0: float

    @property
    def reduction(self) -> float:
        """Fractional latency saving of alpha* against alpha0."""
        return 1 - self.latency / self.latency_alpha0


def wsa_alpha(bytes_up: float, bytes_down: float) -> float:
    """Closed-form optimum sqrt(U) / (sqrt(U) + sqrt(D))."""
    if bytes_up < 0 or bytes_down < 0:
        raise ConfigError("byte counts must be non-negative")
    if bytes_up == 0 and bytes_down == 0:
        raise ConfigError("no traffic: the optimal split is undefined")
    su, sd = math.sqrt(bytes_up), math.sqrt(bytes_down)
    return su / (su + sd)


def wsa_optimize(link: LinkProfile, bytes_up: float, bytes_down: float, tol: float = 1e-10) -> WsaResult:
    alpha = wsa_alpha(bytes_up, bytes_down)
    if bytes_up == 0 or bytes_down == 0:
        raise ConfigError("one-directional traffic: the optimal split is degenerate (alpha in {0, 1})")
    # scale to O(1) so the search tolerance is relative to the objective
    total = bytes_up + bytes_down
    u, d = bytes_up / total, bytes_down / total
    res = minimize_scalar(lambda a: u / a + d / (1 - a), bracket=(1e-9, 0.5, 1 - 1e-9),
                          method="golden", tol=tol)
    return WsaResult(alpha, float(res.x), comm_latency(link, bytes_up, bytes_down, alpha),
                     comm_latency(link, bytes_up, bytes_down), link.alpha0)


def alpha0_for_reduction(bytes_up: float, bytes_down: float, reduction: float) -> float:
    """The uplink share (below alpha*) against which WSA saves ``reduction``."""
    total = bytes_up + bytes_down
    u, d = bytes_up / total, bytes_down / total
    a_star = wsa_alpha(u, d)
    target = (math.sqrt(u) + math.sqrt(d)) ** 2 / (1 - reduction)
    lo, hi = 1e-12, a_star
    for _ in range(200):
        mid = (lo + hi) / 2
        if u / mid + d / (1 - mid) > target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def calibrate_efficiency(link: LinkProfile, bytes_up: float, bytes_down: float, seconds: float) -> float:
    """eta such that comm_latency(alpha0) equals an observed transfer time."""
    raw = comm_latency(replace(link, efficiency=1.0), bytes_up, bytes_down)
    return raw / seconds


@dataclass
class CostReport:
    label: str
    storage: dict[str, float]
    bytes_up: float
    bytes_down: float
    components: dict[str, float]
    offline_parts: tuple[str, ...]
    online_parts: tuple[str, ...]
    notes: list[str] = field(default_factory=list)

    @property
    def offline(self) -> float:
        return sum(self.components[k] for k in self.offline_parts)

    @property
    def online(self) -> float:
        return sum(self.components[k] for k in self.online_parts)

    @property
    def total(self) -> float:
        return sum(self.components.values())

    @property
    def comm(self) -> float:
        return self.components.get("comm", 0.0)

    @property
    def compute(self) -> float:
        return self.total - self.comm

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(offline=self.offline, online=self.online, total=self.total,
                 comm=self.comm, compute=self.compute)
        return d

    def rows(self) -> list[str]:
        out = [f"{self.label},{k},{v:.6g}" for k, v in self.components.items()]
        out += [f"{self.label},total,{self.total:.6g}",
                f"{self.label},offline,{self.offline:.6g}",
                f"{self.label},online,{self.online:.6g}"]
        return out


def traffic(workload: WorkloadProfile, client_garbler: bool) -> tuple[float, float]:
    """(bytes_up, bytes_down) for one inference.

    Tables flow garbler -> evaluator. In the client-garbler setting an
    optional measured upload fraction supplies the reverse-direction volume.
    """
    tables = workload.gc_bytes
    if not client_garbler:
        return 0.0, tables
    f = workload.client_garbler_upload_fraction
    down = tables * (1 - f) / f if f else 0.0
    return tables, down


def latency_breakdown(workload: WorkloadProfile, link: LinkProfile, client_garbler: bool = False,
                      lphe_workers: int = 1, lphe_efficiency: float = 1.0, wsa: bool = False,
                      use_measured_lphe: bool = True, label: str | None = None) -> CostReport:
    if lphe_workers < 1:
        raise ConfigError("lphe_workers must be at least 1")
    if not 0 < lphe_efficiency <= 1:
        raise ConfigError("lphe_efficiency must be in (0, 1]")
    notes = []
    he = workload.he_seconds
    if lphe_workers > 1:
        if use_measured_lphe and workload.he_parallel_seconds is not None:
            he = workload.he_parallel_seconds
            notes.append(f"HE uses the measured layer-parallel time {he:g} s")
        else:
            he = he / (min(lphe_workers, workload.linear_layers) * lphe_efficiency)
            notes.append(f"HE divided by min({lphe_workers}, {workload.linear_layers}) x {lphe_efficiency:g}")
    if workload.relu_count == 0:
        garble = evaluate = 0.0
    elif client_garbler:
        slow = workload.client_device_slowdown
        garble = workload.gc_garble_seconds * slow
        evaluate = workload.gc_eval_seconds / slow
        notes.append(f"client/server GC speed ratio {slow:g} (garble:eval cost {workload.garble_eval_cost_ratio:g})")
    else:
        garble, evaluate = workload.gc_garble_seconds, workload.gc_eval_seconds
    up, down = traffic(workload, client_garbler)
    if up == 0 and down == 0:
        comm = 0.0
    elif wsa and up > 0 and down > 0:
        res = wsa_optimize(link, up, down)
        comm = res.latency
        notes.append(f"WSA alpha*={res.alpha:.4f} vs alpha0={link.alpha0:g}: {100 * res.reduction:.1f}% less comm time")
    else:
        comm = comm_latency(link, up, down)
    if link.efficiency != 1.0:
        notes.append(f"link efficiency eta={link.efficiency:.4f}")
    components = {"he": he, "gc_garble": garble, "comm": comm, "gc_eval": evaluate,
                  "online_ss": workload.online_ss_seconds}
    name = label or ("client_garbler" if client_garbler else "server_garbler")
    return CostReport(name, storage_cost(workload, "client_garbler" if client_garbler else "server_garbler"),
                      up, down, components, ("he", "gc_garble", "comm"), ("gc_eval", "online_ss"), notes)


# ---------------------------------------------------------------------------
# constants file


def load_constants(path: str | Path | None = None) -> dict:
    if path is None:
        text = resources.files("hybridpi.data").joinpath("reference_constants.json").read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read constants file {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed constants file: {exc}") from exc


def workload_from_constants(constants: dict, dataset: str) -> WorkloadProfile:
    """Build a workload, back-computing relu_count from the stated storage."""
    try:
        per = constants["per_relu"]
        ds = constants["datasets"][dataset]
    except KeyError as exc:
        raise ConfigError(f"constants file has no entry {exc}") from exc
    evaluator = per["evaluator_kb"] * KB
    relu_count = ds.get("relu_count") or ds["evaluator_storage_gb"] * GB / evaluator
    timing = ds.get("timing", {})
    return WorkloadProfile(
        name=dataset,
        relu_count=relu_count,
        per_relu_garbler_bytes=per["garbler_kb"] * KB,
        per_relu_evaluator_bytes=evaluator,
        linear_layers=int(ds.get("linear_layers", 1)),
        he_seconds=timing.get("he_seconds", 0.0),
        he_parallel_seconds=timing.get("he_parallel_seconds"),
        gc_garble_seconds=timing.get("gc_garble_seconds", 0.0),
        gc_eval_seconds=timing.get("gc_eval_seconds", 0.0),
        client_garbler_upload_fraction=constants.get("client_garbler_upload_fraction"),
    )


def link_from_constants(constants: dict, efficiency: float | None = None) -> LinkProfile:
    link = constants.get("link", {})
    return LinkProfile(bandwidth_bps=link.get("bandwidth_bps", 1e9), alpha0=link.get("alpha0", 0.5),
                       efficiency=1.0 if efficiency is None else efficiency)
