"""Human and CSV-style views of session meters."""

from __future__ import annotations

import io
import json
from pathlib import Path

from ..wire import Meters


def meters_report(meters: Meters, variant: str = "") -> dict:
    """Structured report: storage per role, bytes per direction and phase, timings."""
    phases = sorted({ph for ph, _, _ in meters.bytes})
    rows = []
    for (phase, direction, ftype), size in sorted(meters.bytes.items()):
        rows.append({"phase": phase, "direction": direction, "frame": ftype,
                     "frames": meters.frames[(phase, direction, ftype)], "bytes": size})
    return {
        "variant": variant,
        "storage": dict(sorted(meters.storage.items())),
        "bytes_up": meters.bytes_up,
        "bytes_down": meters.bytes_down,
        "by_phase": {ph: {"up": meters.total("up", ph), "down": meters.total("down", ph)}
                     for ph in phases},
        "frames": rows,
        "timings": dict(sorted(meters.timings.items())),
    }


def report_csv(report: dict) -> str:
    buf = io.StringIO()
    buf.write("phase,direction,frame,frames,bytes\n")
    for r in report["frames"]:
        buf.write(f"{r['phase']},{r['direction']},{r['frame']},{r['frames']},{r['bytes']}\n")
    for role, size in report["storage"].items():
        buf.write(f"storage,{role},,,{size}\n")
    return buf.getvalue()


def report_text(report: dict) -> str:
    lines = [f"variant: {report['variant'] or '-'}"]
    for role, size in report["storage"].items():
        lines.append(f"persistent storage [{role}]: {size:,} bytes")
    lines.append(f"bytes up (client->server): {report['bytes_up']:,}")
    lines.append(f"bytes down (server->client): {report['bytes_down']:,}")
    for ph, d in report["by_phase"].items():
        lines.append(f"  {ph:8s} up {d['up']:>12,}  down {d['down']:>12,}")
    for name, secs in report["timings"].items():
        lines.append(f"wall clock {name}: {secs:.3f} s")
    return "\n".join(lines)


def write_report(report: dict, out_dir: str | Path) -> None:
    """meters.json holds deterministic counters only; timings.json the rest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    counters = {k: v for k, v in report.items() if k != "timings"}
    (out / "meters.json").write_text(json.dumps(counters, indent=2, sort_keys=True) + "\n")
    (out / "meters.csv").write_text(report_csv(report))
    (out / "timings.json").write_text(json.dumps(report["timings"], indent=2, sort_keys=True) + "\n")
