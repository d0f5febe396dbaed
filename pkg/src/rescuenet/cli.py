"""Command-line front end: mobility generation, single runs, sweeps, reports.

Exit codes: 0 success, 1 validation error, 2 partial sweep failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import experiment
from .config import ConfigError, config_hash, load_config
from .engine import RngManager
from .mobility import TraceFormatError, parse_trace, write_trace

PLOT_SCRIPT = """\
#!/usr/bin/env python3
# Renders PRR / delay / energy vs payload, one panel per technology.
# Reads summary.csv next to this script. Requires matplotlib.
# config_hash={cfg_hash}
import csv
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
rows = list(csv.DictReader(open(os.path.join(here, "summary.csv"))))
techs = sorted({{r["tech"] for r in rows}})
protocols = sorted({{r["protocol"] for r in rows}})
metrics = [("prr_mean", "prr_ci95", "PRR"),
           ("delay_mean_ms", "delay_ci95_ms", "Mean delay (ms)"),
           ("energy_mean_mJ", "energy_ci95_mJ", "Total energy (mJ)")]

fig, axes = plt.subplots(len(metrics), len(techs), figsize=(4 * len(techs), 9), squeeze=False)
for col, tech in enumerate(techs):
    for row, (mkey, ckey, label) in enumerate(metrics):
        ax = axes[row][col]
        for proto in protocols:
            pts = [(int(r["payload_bytes"]), r[mkey], r[ckey]) for r in rows
                   if r["tech"] == tech and r["protocol"] == proto and r[mkey] != ""]
            if not pts:
                continue
            pts.sort()
            xs = [p[0] for p in pts]
            ys = [float(p[1]) for p in pts]
            errs = [float(p[2]) if p[2] else 0.0 for p in pts]
            ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3, label=proto)
        ax.set_xscale("log", base=2)
        ax.set_xticks([2, 16, 64, 128, 256])
        ax.set_xticklabels(["2", "16", "64", "128", "256"])
        ax.set_xlabel("payload (bytes)")
        ax.set_ylabel(label)
        if row == 0:
            ax.set_title(tech)
        ax.grid(True, alpha=0.3)
axes[0][0].legend()
fig.tight_layout()
out = os.path.join(here, "results.png")
fig.savefig(out, dpi=130)
print("wrote", out)
"""


def _load(args):
    sc = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        sc.master_seed = args.seed
    if getattr(args, "iterations", None) is not None:
        sc.iterations = args.iterations
    return sc


def _parse_filters(pairs):
    filters = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"--filter expects key=value, got {pair!r}")
        k, v = pair.split("=", 1)
        if k not in ("protocol", "tech", "payload"):
            raise ConfigError(f"--filter key must be protocol, tech or payload, got {k!r}")
        filters[k] = v
    return filters


def cmd_validate(args) -> int:
    sc = _load(args)
    print(f"config ok: {len(sc.groups)} groups, {sc.node_count} nodes, "
          f"{len(sc.protocols)}x{len(sc.techs)}x{len(sc.payloads)}x{sc.iterations} cells")
    print(f"config_hash={config_hash(sc)}")
    return 0


def cmd_gen_mobility(args) -> int:
    sc = _load(args)
    rngs = RngManager(sc.master_seed)
    trace = experiment.build_trace(sc, rngs, args.iteration)
    text = write_trace(trace)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out} ({trace.n_nodes} nodes)")
    else:
        sys.stdout.write(text)
    return 0


def _external_trace(args):
    if not args.trace:
        return None
    with open(args.trace, "r", encoding="utf-8") as fh:
        return parse_trace(fh.read())


def cmd_run(args) -> int:
    sc = _load(args)
    trace = _external_trace(args)
    log_sink = None
    if args.emit_event_log:
        path = args.emit_event_log
        log_sink = open(path, "w", encoding="utf-8")
    try:
        result = experiment.run_once(
            sc, args.protocol, args.tech, args.payload, args.iteration, trace=trace, log_sink=log_sink
        )
    finally:
        if log_sink:
            log_sink.close()
    delay = "-" if result.mean_delay_s is None else f"{result.mean_delay_s * 1000:.2f} ms"
    print(f"{result.protocol}/{result.tech} payload={result.payload}B seed={result.seed}")
    print(f"  sent={result.sent} delivered={result.delivered} prr={result.prr:.4f}")
    print(f"  drops={result.drops} in_flight={result.in_flight}")
    print(f"  mean_delay={delay} total_energy={result.total_energy_mj:.1f} mJ")
    return 0


def cmd_sweep(args) -> int:
    sc = _load(args)
    filters = _parse_filters(args.filter)
    traces = None
    if args.trace:
        trace = _external_trace(args)
        traces = {it: trace for it in range(sc.iterations)}

    def progress(i, total, cell):
        print(f"[{i}/{total}] {cell[0]}/{cell[1]} payload={cell[2]} seed={cell[3]}", file=sys.stderr)

    results, failures = experiment.run_sweep(
        sc, filters=filters, jobs=args.jobs, on_progress=progress if args.verbose else None, traces=traces
    )
    os.makedirs(args.out, exist_ok=True)
    write_outputs(results, sc, args.out)
    for cell, err in failures:
        print(f"FAILED cell {cell}: {err}", file=sys.stderr)
    print(f"wrote {len(results)} runs to {args.out}", file=sys.stderr)
    return 2 if failures else 0


def write_outputs(results, sc, out_dir):
    cfg_hash = config_hash(sc)
    cells = experiment.summarize(results)
    grid = experiment.classify(cells, sc.classify)
    with open(os.path.join(out_dir, "runs.csv"), "w", encoding="utf-8") as fh:
        fh.write(experiment.runs_csv(results))
    with open(os.path.join(out_dir, "summary.csv"), "w", encoding="utf-8") as fh:
        fh.write(experiment.summary_csv(cells))
    with open(os.path.join(out_dir, "energy_per_node.csv"), "w", encoding="utf-8") as fh:
        fh.write(experiment.node_energy_csv(results))
    with open(os.path.join(out_dir, "classification.txt"), "w", encoding="utf-8") as fh:
        fh.write(experiment.classification_text(grid, sc.classify, cfg_hash))
    with open(os.path.join(out_dir, "plot_results.py"), "w", encoding="utf-8") as fh:
        fh.write(PLOT_SCRIPT.format(cfg_hash=cfg_hash))


def cmd_report(args) -> int:
    import csv as csv_mod

    sc = _load(args)
    path = os.path.join(args.out, "runs.csv")
    with open(path, "r", encoding="utf-8") as fh:
        rows = list(csv_mod.DictReader(fh))
    if not rows:
        print("runs.csv is empty", file=sys.stderr)
        return 1
    results = []
    for row in rows:
        delays = []
        if row["mean_delay_ms"]:
            delays = [float(row["mean_delay_ms"]) / 1000.0] * int(row["delivered"])
        results.append(
            experiment.RunResult(
                protocol=row["protocol"],
                tech=row["tech"],
                payload=int(row["payload_bytes"]),
                seed=int(row["seed"]),
                sent=int(row["sent"]),
                delivered=int(row["delivered"]),
                in_flight=int(row["sent"]) - int(row["delivered"]) - int(row["drop_no_route"])
                - int(row["drop_ttl"]) - int(row["drop_queue"]) - int(row["drop_mac"]),
                drops={
                    "no-route": int(row["drop_no_route"]),
                    "ttl-expired": int(row["drop_ttl"]),
                    "queue-overflow": int(row["drop_queue"]),
                    "mac-failure": int(row["drop_mac"]),
                },
                delays=delays,
                total_energy_mj=float(row["total_energy_mJ"]),
                node_energy_mj=[],
                config_hash=row["config_hash"],
            )
        )
    cells = experiment.summarize(results)
    grid = experiment.classify(cells, sc.classify)
    with open(os.path.join(args.out, "summary.csv"), "w", encoding="utf-8") as fh:
        fh.write(experiment.summary_csv(cells))
    with open(os.path.join(args.out, "classification.txt"), "w", encoding="utf-8") as fh:
        fh.write(experiment.classification_text(grid, sc.classify, results[0].config_hash))
    print(experiment.classification_text(grid, sc.classify, results[0].config_hash))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rescuenet", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", default=None, help="scenario config file (defaults apply if omitted)")
        if seed:
            p.add_argument("--seed", type=int, default=None, help="override the master seed")
            p.add_argument("--iterations", type=int, default=None, help="override iteration count")

    p = sub.add_parser("validate", help="check a config file and print its hash")
    common(p)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("gen-mobility", help="generate a waypoint trace file")
    common(p)
    p.add_argument("--iteration", type=int, default=0, help="which iteration's trace to emit")
    p.add_argument("--out", default=None, help="output path (stdout if omitted)")
    p.set_defaults(fn=cmd_gen_mobility)

    p = sub.add_parser("run", help="run one (protocol, tech, payload) cell")
    common(p)
    p.add_argument("--protocol", required=True, choices=("OLSRv2", "AODVv2", "DD", "GPSR"))
    p.add_argument("--tech", required=True, choices=("WIFI", "WSN", "WBAN"))
    p.add_argument("--payload", type=int, required=True)
    p.add_argument("--iteration", type=int, default=0)
    p.add_argument("--trace", default=None, help="use an external waypoint file")
    p.add_argument("--emit-event-log", default=None, metavar="PATH",
                   help="write one line per dispatched event (time, entity, kind)")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="run the full protocol x tech x payload x seed product")
    common(p)
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--filter", action="append", metavar="K=V",
                   help="restrict to protocol=, tech= or payload= (repeatable)")
    p.add_argument("--trace", default=None, help="use an external waypoint file for all iterations")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--verbose", action="store_true", help="per-run progress on stderr")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("report", help="re-aggregate an existing runs.csv")
    common(p, seed=False)
    p.add_argument("--out", default="results", help="directory holding runs.csv")
    p.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, TraceFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
