"""Command-line entry point: ``hybridpi <command> [options]``.

Exit codes: 0 ok, 2 configuration error, 3 protocol abort, 4 verification
mismatch. Logs go to stderr; reports go to files under --out.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, HybridPIError
from .params import SystemParams

log = logging.getLogger("hybridpi")

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_MISMATCH = 0, 2, 3, 4


class Mismatch(Exception):
    pass


def data_path(*parts: str) -> Path:
    return Path(str(resources.files("hybridpi.data").joinpath(*parts)))


def _params(path: str | None) -> SystemParams:
    return SystemParams.load(path or data_path("params.json"))


def _bundled(name: str | None) -> str | None:
    """Bundled model stem for ``--model NAME`` (or no --model), else None."""
    if name is None:
        return "mlp3"
    if not Path(name).exists() and data_path("models", f"{name}.json").is_file():
        return name
    return None


def _model(path: str | None):
    from .nn import load_model

    stem = _bundled(path)
    return load_model(data_path("models", f"{stem}.json") if stem else path)


def _input(path: str | None, model_path: str | None):
    from .nn import load_vector

    if path:
        return load_vector(path)
    stem = _bundled(model_path)
    if stem is None:
        raise ConfigError("--input is required with a custom --model")
    return load_vector(data_path("models", f"{stem}.input.json"))


def _expected(path: str | None, model_path: str | None, input_path: str | None):
    from .nn import load_vector

    if path:
        return load_vector(path)
    stem = _bundled(model_path)
    if stem is not None and input_path is None:
        return load_vector(data_path("models", f"{stem}.expected.json"))
    return None


def _config(args, params: SystemParams):
    from .protocol import SessionConfig

    seed = args.seed if args.seed is not None else params.seed
    return SessionConfig(he=params.he, variant=args.variant, ot_backend=args.ot,
                         ot_group=params.ot_group, workers=args.workers, seed=seed)


def _out(args) -> Path | None:
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_tcp(transport: str) -> tuple[str, int]:
    parts = transport.split(":")
    if parts[0] != "tcp" or len(parts) != 3:
        raise ConfigError(f"transport must be tcp:HOST:PORT, got {transport!r}")
    try:
        return parts[1], int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"bad port in {transport!r}") from exc


def _write_result(out: Path | None, result, expected, model, meters, variant: str) -> None:
    from .nn import dequantize, save_vector
    from .protocol import meters_report, report_text, write_report

    report = meters_report(meters, variant)
    log.info("%s", report_text(report))
    if out:
        write_report(report, out)
        save_vector(result, out / "result.json", model.p,
                    {"dequantized": dequantize(result, 2 * model.f, model.p).tolist()})
    print(" ".join(str(int(v)) for v in result))
    if expected is not None and not np.array_equal(np.asarray(result), np.asarray(expected)):
        raise Mismatch(f"result {list(map(int, result))} differs from expected {list(map(int, expected))}")


# ---------------------------------------------------------------------------
# commands


def cmd_params_gen(args) -> int:
    params = SystemParams.generate(n=args.n, p_bits=args.p_bits, q_bits=args.q_bits,
                                   ot_bits=args.ot_bits, seed=args.seed or 0)
    path = Path(args.out) if args.out else Path("params.json")
    if path.suffix != ".json":
        path.mkdir(parents=True, exist_ok=True)
        path = path / "params.json"
    params.save(path)
    he = params.he
    print(f"wrote {path}: n={he.n} q={he.q} ({he.q.bit_length()} bits) p={he.p} "
          f"ot prime {params.ot_group.prime.bit_length()} bits")
    return EXIT_OK


def cmd_model_quantize(args) -> int:
    from .nn import build_model, quantize_model, save_model_spec

    try:
        spec = json.loads(Path(args.model).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read float model {args.model}: {exc}") from exc
    p = _params(args.params).he.p
    qspec = quantize_model(spec, p, args.f)
    model = build_model(qspec)
    path = Path(args.out) if args.out else Path(args.model).with_suffix(".q.json")
    if path.suffix != ".json":
        path.mkdir(parents=True, exist_ok=True)
        path = path / (Path(args.model).stem + ".q.json")
    save_model_spec(qspec, path)
    print(f"wrote {path}: {len(model.linear)} linear layers, {model.relu_count} ReLUs, p={p}, f={args.f}")
    return EXIT_OK


def cmd_run_loopback(args) -> int:
    from .protocol import run_loopback

    params = _params(args.params)
    model = _model(args.model)
    x = _input(args.input, args.model)
    expected = _expected(args.expected, args.model, args.input)
    cfg = _config(args, params)
    transport = args.transport
    t0 = time.perf_counter()
    outcome = run_loopback(cfg, model, x, transport)
    log.info("session finished in %.2f s", time.perf_counter() - t0)
    meters = outcome.client.meters
    meters.storage.update(outcome.server.meters.storage)
    meters.timings.update(outcome.server.meters.timings)
    _write_result(_out(args), outcome.result, expected, model, meters, cfg.variant)
    return EXIT_OK


def cmd_run_server(args) -> int:
    from .protocol import Channel, meters_report, run_server, write_report
    from .wire import TcpListener

    params = _params(args.params)
    model = _model(args.model)
    cfg = _config(args, params)
    host, port = _parse_tcp(args.transport)
    listener = TcpListener(host, port)
    log.info("server listening on %s:%d", host, listener.port)
    stream = listener.accept(timeout=args.timeout)
    outcome = run_server(cfg, model, Channel(stream, "server"))
    stream.close()
    out = _out(args)
    report = meters_report(outcome.meters, cfg.variant)
    if out:
        write_report(report, out)
    print(f"server done: storage {outcome.meters.storage.get('server', 0)} bytes, "
          f"up {outcome.meters.bytes_up} down {outcome.meters.bytes_down}")
    return EXIT_OK


def cmd_run_client(args) -> int:
    from .protocol import Channel, run_client
    from .wire import tcp_connect

    params = _params(args.params)
    model = _model(args.model)
    x = _input(args.input, args.model)
    expected = _expected(args.expected, args.model, args.input)
    cfg = _config(args, params)
    host, port = _parse_tcp(args.transport)
    deadline = time.monotonic() + args.timeout
    while True:
        try:
            stream = tcp_connect(host, port)
            break
        except OSError as exc:
            if time.monotonic() > deadline:
                raise ConfigError(f"cannot connect to {host}:{port}: {exc}") from exc
            time.sleep(0.1)
    outcome = run_client(cfg, model, x, Channel(stream, "client"))
    stream.close()
    _write_result(_out(args), outcome.result, expected, model, outcome.meters, cfg.variant)
    return EXIT_OK


def cmd_bench_gc(args) -> int:
    from .gc import build_relu_block, evaluate_batch, garble_batch
    from .rng import Rng

    p = _params(args.params).he.p
    circuit = build_relu_block(p, args.f)
    rng = Rng(args.seed or 0)
    batch = garble_batch(circuit, 1, rng)  # warm caches
    t0 = time.perf_counter()
    for _ in range(args.repeat):
        batch = garble_batch(circuit, args.count, rng)
    t_g = (time.perf_counter() - t0) / args.repeat
    active = batch.zero_labels
    t0 = time.perf_counter()
    for _ in range(args.repeat):
        evaluate_batch(circuit, batch.tables, active)
    t_e = (time.perf_counter() - t0) / args.repeat
    ands = circuit.and_count * args.count
    res = {"p": p, "relu_count": args.count, "and_per_relu": circuit.and_count,
           "garble_seconds": t_g, "eval_seconds": t_e,
           "garble_and_per_s": ands / t_g, "eval_and_per_s": ands / t_e,
           "garble_relu_per_s": args.count / t_g, "eval_relu_per_s": args.count / t_e,
           "table_bytes_per_relu": 32 * circuit.and_count}
    _emit(args, res, "bench_gc.json")
    return EXIT_OK


def cmd_bench_he(args) -> int:
    from .he import MatvecPlan, decrypt_blocks, encrypt_blocks, keygen, matvec_blocks
    from .protocol.lphe import HeJob, lphe_schedule, warm_pool
    from .rng import Rng

    he = _params(args.params).he
    rng = Rng(args.seed or 0)
    sk = keygen(he, rng.derive("key"))
    W = rng.below(he.p, (args.rows, args.cols)).astype(np.int64)
    x = rng.below(he.p, args.cols).astype(np.int64)
    plan = MatvecPlan.for_shape(args.rows, args.cols, he.n)
    t0 = time.perf_counter()
    cts = encrypt_blocks(x, plan, sk, rng.derive("enc"))
    t_enc = time.perf_counter() - t0
    t0 = time.perf_counter()
    out = matvec_blocks(W, cts, plan)
    t_mv = time.perf_counter() - t0
    t0 = time.perf_counter()
    decrypt_blocks(out, plan, sk)
    t_dec = time.perf_counter() - t0
    res = {"n": he.n, "rows": args.rows, "cols": args.cols, "ciphertexts_in": len(cts),
           "encrypt_seconds": t_enc, "matvec_seconds": t_mv, "decrypt_seconds": t_dec}
    if args.layers:
        blobs = tuple(ct.to_bytes() for ct in cts)
        jobs = [HeJob(i, he, W, blobs, np.zeros(args.rows, dtype=np.int64), rng.derive("m", i).seed)
                for i in range(args.layers)]
        t0 = time.perf_counter()
        seq = lphe_schedule(jobs, 1)
        t_seq = time.perf_counter() - t0
        warm_pool(args.workers)
        t0 = time.perf_counter()
        par = lphe_schedule(jobs, args.workers)
        t_par = time.perf_counter() - t0
        res.update(lphe_layers=args.layers, lphe_workers=args.workers, lphe_sequential_seconds=t_seq,
                   lphe_parallel_seconds=t_par, lphe_speedup=t_seq / t_par,
                   lphe_identical=[a.outputs for a in seq] == [b.outputs for b in par])
    _emit(args, res, "bench_he.json")
    return EXIT_OK


def cmd_cost_report(args) -> int:
    from .cost import cost_report, load_constants
    from .cost.report import format_cost_report

    rep = cost_report(load_constants(args.constants), alpha0=args.alpha0, efficiency=args.efficiency,
                       lphe_workers=args.workers)
    print(format_cost_report(rep))
    out = _out(args)
    if out:
        (out / "cost_report.json").write_text(json.dumps(rep, indent=2) + "\n")
        rows = ["report,component,seconds"]
        for key in ("baseline", "baseline_raw_link", "sysopt"):
            r = rep[key]
            rows += [f"{key},{k},{v:.6g}" for k, v in r["components"].items()]
            rows.append(f"{key},total,{r['total']:.6g}")
        (out / "cost_report.csv").write_text("\n".join(rows) + "\n")
    return EXIT_OK


def cmd_cost_wsa(args) -> int:
    from .cost import LinkProfile, comm_latency, wsa_optimize

    link = LinkProfile(bandwidth_bps=args.bandwidth, alpha0=args.alpha0, efficiency=args.efficiency)
    res = wsa_optimize(link, args.up, args.down)
    out = {"alpha_star": res.alpha, "alpha_search": res.alpha_search,
           "abs_diff": abs(res.alpha - res.alpha_search),
           "latency_alpha_star": res.latency, "latency_alpha0": res.latency_alpha0,
           "alpha0": args.alpha0, "ratio": res.latency / res.latency_alpha0, "reduction": res.reduction}
    print(f"alpha* = {res.alpha:.6f} (golden-section {res.alpha_search:.6f})")
    print(f"T(alpha*) = {res.latency:.6g} s, T({args.alpha0:g}) = {res.latency_alpha0:.6g} s, "
          f"ratio {out['ratio']:.4f}, reduction {100 * res.reduction:.1f}%")
    if args.grid:
        grid = np.linspace(0.001, 0.999, args.grid)
        worst = min(comm_latency(link, args.up, args.down, a) for a in grid)
        out["grid_min_latency"] = worst
        print(f"grid of {args.grid} alphas: min T = {worst:.6g} s (>= T(alpha*))")
    _emit(args, out, "cost_wsa.json", quiet=True)
    return EXIT_OK


def cmd_cost_arrivals(args) -> int:
    from .cost import ArrivalSimConfig, arrival_sim

    rows = []
    for lam in args.rates:
        means, p95s, unstable = [], [], False
        for seed in range(args.seeds):
            cfg = ArrivalSimConfig(lam, args.l_off, args.l_on, args.cap, args.bundle, args.horizon, seed)
            r = arrival_sim(cfg)
            means.append(r.mean)
            p95s.append(r.p95)
            unstable = r.unstable
        rows.append({"rate": lam, "load": lam * args.l_off, "mean_latency": float(np.mean(means)),
                     "p95_latency": float(np.mean(p95s)), "unstable": unstable})
        flag = "  UNSTABLE (rate * L_off > 1)" if unstable else ""
        print(f"rate {lam:g}/s  load {lam * args.l_off:.3f}  mean {np.mean(means):.4g} s  "
              f"p95 {np.mean(p95s):.4g} s{flag}")
    _emit(args, {"capacity": int(args.cap // args.bundle), "rows": rows}, "cost_arrivals.json", quiet=True)
    return EXIT_OK


def _emit(args, data: dict, name: str, quiet: bool = False) -> None:
    if not quiet:
        for k, v in data.items():
            print(f"{k}: {v:.6g}" if isinstance(v, float) else f"{k}: {v}")
    out = _out(args)
    if out:
        (out / name).write_text(json.dumps(data, indent=2) + "\n")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hybridpi", description="Hybrid HE/GC private inference toolkit")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, protocol: bool = False):
        p.add_argument("--params", help="params file (default: bundled)")
        p.add_argument("--seed", help="hex seed (default: the params file seed)")
        p.add_argument("--out", help="output directory")
        if protocol:
            p.add_argument("--model", help="quantized model file or bundled name: mlp3, conv, conv2 (default mlp3)")
            p.add_argument("--variant", default="server-garbler", choices=["server-garbler", "client-garbler"])
            p.add_argument("--workers", type=int, default=1, help="LPHE worker processes")
            p.add_argument("--ot", default="base", choices=["base", "dealer"], help="OT backend")

    p = sub.add_parser("params-gen", help="generate HE/OT parameters")
    p.add_argument("--n", type=int, default=4096)
    p.add_argument("--p-bits", type=int, default=21)
    p.add_argument("--q-bits", type=int, default=60)
    p.add_argument("--ot-bits", type=int, default=512)
    p.add_argument("--seed", help="hex session seed stored in the file")
    p.add_argument("--out", help="output file or directory")
    p.set_defaults(func=cmd_params_gen)

    p = sub.add_parser("model-quantize", help="quantize a float model file")
    p.add_argument("model")
    p.add_argument("--f", type=int, default=6, help="fractional bits")
    p.add_argument("--params")
    p.add_argument("--out")
    p.set_defaults(func=cmd_model_quantize)

    p = sub.add_parser("run-loopback", help="offline + online in one process")
    common(p, protocol=True)
    p.add_argument("--input", help="input vector file")
    p.add_argument("--expected", help="expected output vector file")
    p.add_argument("--transport", default="loopback", help="loopback or tcp[:HOST:PORT]")
    p.set_defaults(func=cmd_run_loopback)

    p = sub.add_parser("run-server", help="serve one session over TCP")
    common(p, protocol=True)
    p.add_argument("--transport", default="tcp:127.0.0.1:7766")
    p.add_argument("--timeout", type=float, default=60.0)
    p.set_defaults(func=cmd_run_server)

    p = sub.add_parser("run-client", help="run one session against a TCP server")
    common(p, protocol=True)
    p.add_argument("--input")
    p.add_argument("--expected")
    p.add_argument("--transport", default="tcp:127.0.0.1:7766")
    p.add_argument("--timeout", type=float, default=60.0)
    p.set_defaults(func=cmd_run_client)

    p = sub.add_parser("bench-gc", help="garbling/evaluation throughput of the ReLU block")
    common(p)
    p.add_argument("--count", type=int, default=4096, help="ReLUs per batch")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--f", type=int, default=6)
    p.set_defaults(func=cmd_bench_gc)

    p = sub.add_parser("bench-he", help="HE matvec timings and LPHE speedup")
    common(p)
    p.add_argument("--rows", type=int, default=64)
    p.add_argument("--cols", type=int, default=64)
    p.add_argument("--layers", type=int, default=0, help="also time LPHE over this many equal layers")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_bench_he)

    p = sub.add_parser("cost-report", help="storage/latency report from a constants file")
    p.add_argument("--constants", help="constants file (default: bundled)")
    p.add_argument("--alpha0", type=float, default=None, help="default uplink share")
    p.add_argument("--efficiency", type=float, default=None,
                   help="link efficiency (default: calibrated from the stated transfer time)")
    p.add_argument("--workers", type=int, default=16, help="LPHE workers")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cost_report)

    p = sub.add_parser("cost-wsa", help="optimal uplink/downlink split")
    p.add_argument("--up", type=float, default=0.835, help="uplink bytes (or share)")
    p.add_argument("--down", type=float, default=0.165, help="downlink bytes (or share)")
    p.add_argument("--bandwidth", type=float, default=1e9)
    p.add_argument("--alpha0", type=float, default=0.5)
    p.add_argument("--efficiency", type=float, default=1.0)
    p.add_argument("--grid", type=int, default=1000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cost_wsa)

    p = sub.add_parser("cost-arrivals", help="precompute buffer simulation over arrival rates")
    p.add_argument("--rates", type=float, nargs="+", default=[0.1, 0.3, 0.6, 0.9, 1.2, 1.5])
    p.add_argument("--l-off", type=float, default=1.0)
    p.add_argument("--l-on", type=float, default=0.1)
    p.add_argument("--cap", type=float, default=4.0, help="client storage cap (bytes)")
    p.add_argument("--bundle", type=float, default=1.0, help="bundle size (bytes)")
    p.add_argument("--horizon", type=float, default=500.0)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cost_arrivals)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    from .errors import ProtocolAbort

    try:
        return args.func(args)
    except Mismatch as exc:
        log.error("verification mismatch: %s", exc)
        return EXIT_MISMATCH
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except ProtocolAbort as exc:
        log.error("protocol aborted: %s", exc)
        return EXIT_ABORT
    except HybridPIError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ABORT
    except ValueError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
