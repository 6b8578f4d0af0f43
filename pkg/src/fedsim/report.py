"""Figure rendering for recorded results: reads results.json / metrics.csv
and writes one PNG per metric next to a tidy CSV copy."""

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

# metrics drawn on a log scale when positive
_LOG_METRICS = {"suboptimality"}


def load_results(results_dir: str) -> dict:
    path = os.path.join(results_dir, "results.json")
    with open(path) as fh:
        return json.load(fh)


def render_report(results_dir: str, out_dir: str) -> list:
    """Render per-metric figures from a results directory.

    Returns the list of files written: one PNG per metric (series per
    config) plus report.csv with the plotted rows.
    """
    doc = load_results(results_dir)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if doc.get("kind") == "compare":
        return _render_compare(doc, out_dir)

    runs = doc.get("runs", [])
    metric_names = sorted({name for run in runs for name in run["series"]})
    rows = []
    for name in metric_names:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for cid, run in enumerate(runs):
            if name not in run["series"]:
                continue
            series = run["series"][name]
            xs = [r for r, _ in series]
            ys = [v for _, v in series]
            label = run["algorithm"] if len(runs) == 1 else \
                "%s #%d" % (run["algorithm"], cid)
            ax.plot(xs, ys, label=label, linewidth=1.2)
            rows.extend((cid, name, r, v) for r, v in series)
        if name in _LOG_METRICS and all(
                v > 0 for run in runs for _, v in run["series"].get(name, [])):
            ax.set_yscale("log")
        ax.set_xlabel("round")
        ax.set_ylabel(name)
        ax.grid(True, alpha=0.3)
        if len(runs) > 1:
            ax.legend(fontsize=7)
        fig.tight_layout()
        path = os.path.join(out_dir, "metric_%s.png" % name)
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    csv_path = os.path.join(out_dir, "report.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["config_id", "metric", "round", "value"])
        for row in rows:
            writer.writerow([row[0], row[1], row[2], repr(row[3])])
    written.append(csv_path)
    return written


def _render_compare(doc: dict, out_dir: str) -> list:
    rows = doc["rows"]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    labels = ["%s K=%d" % (r["algorithm"], r["local_steps"]) for r in rows]
    ax.bar(range(len(rows)), [r["best"] for r in rows])
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=7)
    ax.set_ylabel("best suboptimality")
    if all(r["best"] > 0 for r in rows):
        ax.set_yscale("log")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    path = os.path.join(out_dir, "compare.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    csv_path = os.path.join(out_dir, "report.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["algorithm", "clients", "local_steps", "rounds",
                         "best"])
        for r in rows:
            writer.writerow([r["algorithm"], r["clients"], r["local_steps"],
                             r["rounds"], repr(r["best"])])
    return [path, csv_path]
