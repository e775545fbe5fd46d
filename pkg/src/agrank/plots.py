"""Figure rendering for evaluation reports (headless matplotlib)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def plot_ndcg_report(rows: list[dict], out_path, title: str = "nDCG vs truncation level") -> None:
    """nDCG@k curves: one faint line per query, mean in bold.

    ``rows`` is the evaluation report row list (query_id, k, ndcg); rows
    with query_id "mean" form the highlighted curve.
    """
    by_query: dict[str, list[tuple[int, float]]] = {}
    for row in rows:
        by_query.setdefault(row["query_id"], []).append((row["k"], row["ndcg"]))

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for query_id, points in sorted(by_query.items()):
        if query_id == "mean":
            continue
        points.sort()
        ax.plot([p[0] for p in points], [p[1] for p in points], color="steelblue", alpha=0.25, lw=0.8)
    mean_points = sorted(by_query.get("mean", []))
    if mean_points:
        ax.plot(
            [p[0] for p in mean_points],
            [p[1] for p in mean_points],
            color="crimson",
            lw=2.2,
            marker="o",
            label="mean",
        )
        ax.legend(loc="lower right")
    ax.set_xlabel("ranking truncation level k")
    ax.set_ylabel("nDCG@k")
    ax.set_ylim(0.0, 1.02)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
