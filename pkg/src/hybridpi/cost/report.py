"""Cost report driven by a constants file (the bundled one holds
ResNet-18 reference figures)."""

from __future__ import annotations

from dataclasses import replace

from .model import (
    GB,
    alpha0_for_reduction,
    calibrate_efficiency,
    latency_breakdown,
    link_from_constants,
    storage_cost,
    traffic,
    workload_from_constants,
    wsa_optimize,
)


def cost_report(constants: dict, alpha0: float | None = None, efficiency: float | None = None,
                 lphe_workers: int = 16) -> dict:
    """Storage, baseline and optimized latency, and WSA figures.

    When ``efficiency`` is None the link-efficiency factor is calibrated so
    the baseline table transfer takes the stated communication time.
    """
    tiny = workload_from_constants(constants, "tinyimagenet")
    link = link_from_constants(constants)
    if alpha0 is not None:
        link = replace(link, alpha0=alpha0)
    comm_seconds = constants["datasets"]["tinyimagenet"].get("timing", {}).get("comm_seconds")
    up, down = traffic(tiny, client_garbler=False)
    if efficiency is None and comm_seconds:
        efficiency = calibrate_efficiency(replace(link, alpha0=0.5), up, down, comm_seconds)
        calibrated = True
    else:
        efficiency = 1.0 if efficiency is None else efficiency
        calibrated = False
    link = replace(link, efficiency=efficiency)

    storage = {}
    for name in constants["datasets"]:
        w = workload_from_constants(constants, name)
        storage[name] = {
            "relu_count": w.relu_count,
            "server_garbler": storage_cost(w, "server_garbler"),
            "client_garbler": storage_cost(w, "client_garbler"),
        }
    sg = storage["tinyimagenet"]["server_garbler"]["client"]
    cg = storage["tinyimagenet"]["client_garbler"]["client"]

    baseline = latency_breakdown(tiny, link, label="baseline")
    raw_link = replace(link, efficiency=1.0)
    baseline_raw = latency_breakdown(tiny, raw_link, label="baseline_raw_link")
    sysopt = latency_breakdown(tiny, link, client_garbler=True, lphe_workers=lphe_workers,
                               wsa=True, label="sysopt")

    cg_up, cg_down = traffic(tiny, client_garbler=True)
    wsa = wsa_optimize(link, cg_up, cg_down)
    claimed = constants.get("wsa_claimed_reduction")
    ref = constants.get("reference_totals", {})
    return {
        "link_efficiency": efficiency,
        "link_efficiency_calibrated": calibrated,
        "alpha0": link.alpha0,
        "storage": storage,
        "client_storage_reduction": sg / cg if cg else float("inf"),
        "baseline": baseline.to_dict(),
        "baseline_raw_link": baseline_raw.to_dict(),
        "sysopt": sysopt.to_dict(),
        "reference_totals": ref,
        "wsa": {
            "bytes_up": cg_up, "bytes_down": cg_down,
            "alpha_star": wsa.alpha, "alpha_search": wsa.alpha_search,
            "latency": wsa.latency, "latency_alpha0": wsa.latency_alpha0,
            "reduction_vs_alpha0": wsa.reduction,
            "claimed_reduction": claimed,
            "alpha0_matching_claim": alpha0_for_reduction(cg_up, cg_down, claimed) if claimed else None,
        },
    }


def format_cost_report(rep: dict) -> str:
    lines = []
    for name, s in rep["storage"].items():
        lines.append(f"[{name}] relu_count={s['relu_count']:.4g}  client storage: "
                     f"server-garbler {s['server_garbler']['client'] / GB:.2f} GB, "
                     f"client-garbler {s['client_garbler']['client'] / GB:.2f} GB")
    lines.append(f"client storage reduction (client-garbler): {rep['client_storage_reduction']:.2f}x")
    eta = rep["link_efficiency"]
    how = "calibrated to the stated transfer time" if rep["link_efficiency_calibrated"] else "given"
    lines.append(f"link efficiency eta = {eta:.4f} ({how}); alpha0 = {rep['alpha0']:g}")
    for key in ("baseline", "baseline_raw_link", "sysopt"):
        r = rep[key]
        parts = ", ".join(f"{k} {v:.1f}" for k, v in r["components"].items())
        lines.append(f"{key:18s} total {r['total']:8.1f} s  ({parts})")
    ref = rep["reference_totals"]
    if ref:
        lines.append(f"reference totals: baseline {ref.get('baseline_seconds')} s, "
                     f"optimized {ref.get('sysopt_seconds')} s")
    w = rep["wsa"]
    lines.append(f"WSA: U:D = {w['bytes_up'] / (w['bytes_up'] + w['bytes_down']):.3f}:"
                 f"{w['bytes_down'] / (w['bytes_up'] + w['bytes_down']):.3f}  alpha* = {w['alpha_star']:.6f} "
                 f"(search {w['alpha_search']:.6f})")
    lines.append(f"     T(alpha*)/T(alpha0) = {w['latency'] / w['latency_alpha0']:.4f} "
                 f"-> {100 * w['reduction_vs_alpha0']:.1f}% less communication time than alpha0")
    if w["claimed_reduction"]:
        lines.append(f"     a {100 * w['claimed_reduction']:.0f}% reduction corresponds to alpha0 = "
                     f"{w['alpha0_matching_claim']:.4f}")
    return "\n".join(lines)
