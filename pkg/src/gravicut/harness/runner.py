"""Batch runs and sweeps writing CSV files (and an SVG plot for sweeps)."""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..cut import run_driver
from .config import run_stream

log = logging.getLogger(__name__)

RUN_COLUMNS = ["dim", "budget", "seed", "regret", "iterations", "q_init", "q_fcp",
               "q_grad", "anomalies", "wall_ms"]
SUMMARY_COLUMNS = ["dim", "budget", "median_regret", "iqr"]


def worker_count(jobs):
    cap = os.environ.get("GRAVICUT_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, jobs))


def _anomaly_field(anomalies):
    counts = {}
    for a in anomalies:
        counts[a] = counts.get(a, 0) + 1
    return ";".join(f"{k}={counts[k]}" for k in sorted(counts))


def run_one(config, dim, budget, seed):
    """Run the driver once; returns ``(csv_row, trace_lines)``."""
    spec = config.problem(dim)
    rng = run_stream(config.master_seed, dim, budget, seed)
    lines = []
    trace = None
    if config.trace:
        def trace(record):
            lines.append(json.dumps({"dim": dim, "budget": budget, "seed": seed, **record}))
    _, report = run_driver(spec, config.noise_model(), budget, config.delta, rng,
                           seed=seed, trace=trace)
    q = report.queries_by_phase
    row = {
        "dim": dim, "budget": budget, "seed": seed,
        "regret": repr(report.simple_regret),
        "iterations": report.iterations,
        "q_init": q["init"], "q_fcp": q["fcp"], "q_grad": q["gradient"],
        "anomalies": _anomaly_field(report.anomalies),
        "wall_ms": round(1000 * report.wall_time, 3),
    }
    return row, lines


def _run_job(args):
    return run_one(*args)


def execute(config):
    """All runs of ``config`` in (dim, budget, seed) order."""
    jobs = [(config, d, b, s) for d in config.dims for b in config.budgets
            for s in config.seeds]
    workers = worker_count(len(jobs))
    if workers == 1:
        return [_run_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))


def csv_text(columns, rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def check_writable(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with tempfile.NamedTemporaryFile(dir=out_dir):
        pass


def write_outputs(out_dir, files):
    """Write ``{name: text}`` atomically: all files appear or none does."""
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.")
            staged.append((tmp, os.path.join(out_dir, name)))
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        for tmp, final in staged:
            os.replace(tmp, final)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


def summarize(rows):
    groups = {}
    for row in rows:
        groups.setdefault((row["dim"], row["budget"]), []).append(float(row["regret"]))
    summary = []
    for (dim, budget), regrets in sorted(groups.items()):
        q25, q50, q75 = np.percentile(regrets, [25, 50, 75])
        summary.append({"dim": dim, "budget": budget, "median_regret": repr(float(q50)),
                        "iqr": repr(float(q75 - q25))})
    return summary


def regret_plot_svg(summary):
    """Log-log plot of median regret against budget, one line per dimension."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for dim in sorted({row["dim"] for row in summary}):
        pts = [(row["budget"], float(row["median_regret"])) for row in summary
               if row["dim"] == dim]
        budgets, regrets = zip(*pts)
        ax.loglog(budgets, np.maximum(regrets, 1e-12), marker="o", label=f"d = {dim}")
    ax.set_xlabel("budget n")
    ax.set_ylabel("median simple regret")
    ax.legend()
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def cmd_run(config):
    check_writable(config.out)
    started = time.perf_counter()
    results = execute(config)
    rows = [row for row, _ in results]
    files = {"runs.csv": csv_text(RUN_COLUMNS, rows)}
    if config.trace:
        files["trace.jsonl"] = "".join(line + "\n" for _, lines in results for line in lines)
    write_outputs(config.out, files)
    log.info("%d runs in %.1fs -> %s", len(rows), time.perf_counter() - started, config.out)
    return rows


def cmd_sweep(config):
    check_writable(config.out)
    results = execute(config)
    rows = [row for row, _ in results]
    summary = summarize(rows)
    files = {
        "runs.csv": csv_text(RUN_COLUMNS, rows),
        "summary.csv": csv_text(SUMMARY_COLUMNS, summary),
        "regret.svg": regret_plot_svg(summary),
    }
    if config.trace:
        files["trace.jsonl"] = "".join(line + "\n" for _, lines in results for line in lines)
    write_outputs(config.out, files)
    return summary
