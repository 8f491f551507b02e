"""Benchmark report output: CSV/JSON streams and matplotlib figures."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .bench import BenchReport

CSV_COLUMNS = (
    "scenario",
    "mode",
    "calls",
    "wall_time_s",
    "throughput_cps",
    "success_rate",
    "p50_ms",
    "p95_ms",
)


def reports_to_csv(reports: list[BenchReport]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for report in reports:
        writer.writerow(report.to_row())
    return buffer.getvalue()


def reports_to_json(reports: list[BenchReport]) -> str:
    return json.dumps([r.to_json() for r in reports], indent=2) + "\n"


def render_figures(reports: list[BenchReport], directory: str | Path) -> list[Path]:
    """Throughput and latency charts rendered next to the delimited output."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    scenarios = list(dict.fromkeys(r.scenario for r in reports))
    modes = list(dict.fromkeys(r.mode for r in reports))
    by_cell = {(r.scenario, r.mode): r for r in reports}
    width = 0.8 / max(1, len(modes))
    paths = []

    fig, ax = plt.subplots(figsize=(7, 4))
    for offset, mode in enumerate(modes):
        xs = [i + offset * width for i in range(len(scenarios))]
        ys = [by_cell[(s, mode)].throughput_cps if (s, mode) in by_cell else 0.0
              for s in scenarios]
        errs = [by_cell[(s, mode)].throughput_stddev_cps if (s, mode) in by_cell else 0.0
                for s in scenarios]
        ax.bar(xs, ys, width=width, yerr=errs, capsize=3, label=f"{mode} mode")
    ax.set_yscale("log")
    ax.set_ylabel("throughput (calls/sec)")
    ax.set_xticks([i + width * (len(modes) - 1) / 2 for i in range(len(scenarios))])
    ax.set_xticklabels(scenarios)
    ax.set_title("Concurrent tool-call throughput by source and mode")
    ax.legend()
    fig.tight_layout()
    throughput_path = directory / "throughput.png"
    fig.savefig(throughput_path, dpi=150)
    plt.close(fig)
    paths.append(throughput_path)

    fig, ax = plt.subplots(figsize=(7, 4))
    for offset, (label, attr) in enumerate((("p50", "p50_ms"), ("p95", "p95_ms"))):
        xs = [i + offset * 0.4 for i in range(len(reports))]
        ys = [max(getattr(r, attr), 1e-3) for r in reports]
        ax.bar(xs, ys, width=0.4, label=label)
    ax.set_yscale("log")
    ax.set_ylabel("per-call latency (ms)")
    ax.set_xticks([i + 0.2 for i in range(len(reports))])
    ax.set_xticklabels([f"{r.scenario}\n{r.mode}" for r in reports], fontsize=8)
    ax.set_title("Per-call latency percentiles")
    ax.legend()
    fig.tight_layout()
    latency_path = directory / "latency.png"
    fig.savefig(latency_path, dpi=150)
    plt.close(fig)
    paths.append(latency_path)
    return paths


def write_report_dir(
    reports: list[BenchReport], directory: str | Path, *, figures: bool = True
) -> list[Path]:
    """Write bench.csv, bench.json, and the figures into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / "bench.csv"
    csv_path.write_text(reports_to_csv(reports))
    json_path = directory / "bench.json"
    json_path.write_text(reports_to_json(reports))
    written = [csv_path, json_path]
    if figures:
        written.extend(render_figures(reports, directory))
    return written
