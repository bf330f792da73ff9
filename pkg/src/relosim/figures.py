"""Report figures, rendered to files next to the delimited outputs."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

MODE_COLORS = {
    "walk": "#2a9d8f",
    "bike": "#8ab17d",
    "bus": "#e9c46a",
    "T": "#f4a261",
    "car": "#e76f51",
}


def _color(mode_id, i):
    return MODE_COLORS.get(mode_id, f"C{i}")


def save_movers_figure(history, path):
    """Mover count per iteration."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot([r["iteration"] for r in history], [r["movers"] for r in history],
            lw=1.5, color="#264653")
    ax.set_xlabel("iteration")
    ax.set_ylabel("movers")
    ax.set_title("Relocations per iteration")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_mode_shares_figure(history, mode_ids, path):
    """Stacked mode-share evolution over the run."""
    fig, ax = plt.subplots(figsize=(7, 4))
    iterations = [r["iteration"] for r in history]
    shares = [[r["mode_shares"][m] for r in history] for m in mode_ids]
    ax.stackplot(iterations, shares, labels=mode_ids,
                 colors=[_color(m, i) for i, m in enumerate(mode_ids)])
    ax.set_xlabel("iteration")
    ax.set_ylabel("mode share")
    ax.set_ylim(0, 1)
    ax.set_title("Mode shares")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_error_evolution_figure(trace_rows, path):
    """Stacked housing/mobility error over calibration evaluations."""
    fig, ax = plt.subplots(figsize=(8, 4))
    xs = [r["evaluation"] for r in trace_rows]
    housing = [r["housing_error"] for r in trace_rows]
    mobility = [r["mobility_error"] for r in trace_rows]
    ax.stackplot(xs, [housing, mobility], labels=["housing error", "mobility error"],
                 colors=["#457b9d", "#e63946"], alpha=0.85)
    # best-so-far total for readability
    best, curve = float("inf"), []
    for h, m in zip(housing, mobility):
        best = min(best, h + m)
        curve.append(best)
    ax.plot(xs, curve, color="#1d3557", lw=1.2, label="best total so far")
    ax.set_xlabel("evaluation")
    ax.set_ylabel("error [%]")
    ax.set_title("Calibration error evolution")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_comparison_figure(comparison, path):
    """Baseline vs what-if mode shares, side by side."""
    base = comparison["baseline"]["mode_shares"]
    var = comparison["whatif"]["mode_shares"]
    modes = list(base.keys())
    fig, ax = plt.subplots(figsize=(7, 4))
    x = range(len(modes))
    w = 0.38
    ax.bar([i - w / 2 for i in x], [base[m] for m in modes], width=w,
           label="baseline", color="#457b9d")
    ax.bar([i + w / 2 for i in x], [var[m] for m in modes], width=w,
           label="what-if", color="#e76f51")
    ax.set_xticks(list(x))
    ax.set_xticklabels(modes)
    ax.set_ylabel("mode share")
    ax.set_title("Baseline vs what-if mode shares")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
