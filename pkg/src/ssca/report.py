"""PNG figures for a comparison run, drawn from the seed-averaged summary rows.

Figures are rendered with the Agg backend and saved without timestamp or
software metadata so identical summaries give identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiment import column_label  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.6),
    "figure.dpi": 100,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "svg.hashsalt": "ssca",
}
COLOURS = {"FA": "#7f7f7f", "ICA": "#1f77b4", "SSFA": "#ff7f0e", "SSCA": "#2ca02c"}
BUCKET_NAMES = {"all": "all orders", "1-5": "size 1-5", "6+": "size 6+"}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path


def _select(summary, **match):
    return [r for r in summary if all(r[k] == v for k, v in match.items())]


HATCHES = ("", "//", "..", "xx", "\\\\", "oo")
LINESTYLES = ("-", "--", ":", "-.")
ORDER = ("FA", "ICA", "SSFA", "SSCA")


def _variants(summary) -> list[tuple[str, object, object]]:
    seen = {(r["strategy"], r["C"], r["s"]) for r in summary}
    return sorted(seen, key=lambda v: (ORDER.index(v[0]) if v[0] in ORDER else len(ORDER), v[0], v[1] or 0, v[2] or 0.0))


def _styles(variants) -> list[int]:
    """Per variant, its index among variants of the same strategy."""
    count: dict[str, int] = {}
    out = []
    for st, _, _ in variants:
        out.append(count.get(st, 0))
        count[st] = out[-1] + 1
    return out


def _legend_below(ax, n: int) -> None:
    ax.legend(loc="upper center", bbox_to_anchor=(0.5, -0.18), ncol=min(n, 3), fontsize=7)


def picker_figure(summary, path: Path) -> Path:
    """Average picking time across the (mu, sigma) grid, one line per strategy variant."""
    pickers = sorted({(r["mu"], r["sigma"]) for r in summary})
    variants = _variants(summary)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for (st, C, s), k in zip(variants, _styles(variants)):
            vals = []
            for ms in pickers:
                hit = _select(summary, strategy=st, C=C, s=s, mu=ms[0], sigma=ms[1], bucket="all")
                vals.append(hit[0]["mean_avg_time"] if hit and hit[0]["mean_avg_time"] is not None else float("nan"))
            ax.plot(range(len(pickers)), vals, LINESTYLES[k % len(LINESTYLES)], marker="o", ms=3,
                    color=COLOURS.get(st), label=column_label(st, C, s))
        ax.set_xticks(range(len(pickers)), [f"({m:g},{s:g})" for m, s in pickers])
        ax.set_xlabel("picker sorting time (mu, sigma) [s]")
        ax.set_ylabel("average picking time [s]")
        _legend_below(ax, len(variants))
        fig.tight_layout()
        return _save(fig, path)


def cross_machine_figure(summary, path: Path) -> Path:
    """Cross-machine probability by order-size bucket at the first picker cell."""
    mu, sigma = min((r["mu"], r["sigma"]) for r in summary)
    variants = _variants(summary)
    buckets = list(BUCKET_NAMES)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        width = 0.8 / max(len(variants), 1)
        for n, ((st, C, s), k) in enumerate(zip(variants, _styles(variants))):
            vals = []
            for b in buckets:
                hit = _select(summary, strategy=st, C=C, s=s, mu=mu, sigma=sigma, bucket=b)
                v = hit[0]["mean_cross_prob"] if hit else None
                vals.append(float("nan") if v is None else v)
            xs = [i + (n - (len(variants) - 1) / 2) * width for i in range(len(buckets))]
            ax.bar(xs, vals, width, label=column_label(st, C, s), color=COLOURS.get(st),
                   hatch=HATCHES[k % len(HATCHES)], edgecolor="white", linewidth=0.5)
        ax.set_xticks(range(len(buckets)), [BUCKET_NAMES[b] for b in buckets])
        ax.set_ylabel("cross-machine probability")
        ax.set_ylim(0, 1)
        _legend_below(ax, len(variants))
        fig.tight_layout()
        return _save(fig, path)


def sweep_figure(summary, path: Path, axis: str) -> Path | None:
    """Average picking time of the clustered strategies against ``axis`` ("C" or "s")."""
    other = "s" if axis == "C" else "C"
    mu, sigma = min((r["mu"], r["sigma"]) for r in summary)
    rows = [r for r in summary if r["C"] is not None and r["mu"] == mu and r["sigma"] == sigma]
    if len({r[axis] for r in rows}) < 2:
        return None
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(BUCKET_NAMES), figsize=(9.6, 3.8), sharex=True)
        for ax, (b, title) in zip(axes, BUCKET_NAMES.items()):
            n = 0
            for st in [x for x in ORDER if any(r["strategy"] == x for r in rows)]:
                for fixed in sorted({r[other] for r in rows if r["strategy"] == st}):
                    pts = sorted((r[axis], r["mean_avg_time"]) for r in rows
                                 if r["strategy"] == st and r[other] == fixed and r["bucket"] == b
                                 and r["mean_avg_time"] is not None)
                    if pts:
                        xs, ys = zip(*pts)
                        ax.plot(xs, ys, LINESTYLES[n % len(LINESTYLES)], marker="o", ms=3, color=COLOURS.get(st),
                                label=f"{st}, {other}={fixed:g}")
                        n += 1
            ax.set_title(title)
            if axis == "s":
                ax.set_xscale("log")
            else:
                ax.xaxis.get_major_locator().set_params(integer=True)
            ax.set_xlabel("cluster size C" if axis == "C" else "similarity threshold s")
        axes[0].set_ylabel("average picking time [s]")
        handles, labels = axes[0].get_legend_handles_labels()
        fig.legend(handles, labels, loc="lower center", ncol=min(len(labels), 4), fontsize=7)
        fig.tight_layout(rect=(0, 0.12, 1, 1))
        return _save(fig, path)


def write_figures(summary, out_dir: str | Path) -> list[Path]:
    """Render every figure the summary supports into ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    written = [picker_figure(summary, out / "picking_time.png"), cross_machine_figure(summary, out / "cross_machine.png")]
    for axis, name in (("C", "cluster_size_sweep.png"), ("s", "threshold_sweep.png")):
        p = sweep_figure(summary, out / name, axis)
        if p is not None:
            written.append(p)
    return written
