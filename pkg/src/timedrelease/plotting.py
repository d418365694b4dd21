"""Figures written next to the CSV reports."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.figsize": (4.5, 3.0),
    "savefig.dpi": 150,
}


def _new():
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
    return fig, ax


def _save(fig, path):
    with plt.rc_context(STYLE):
        fig.tight_layout()
        fig.savefig(path)
    plt.close(fig)
    return path


def _duration_label(seconds):
    for unit, size in (("w", 604800), ("d", 86400), ("h", 3600), ("min", 60)):
        if seconds >= size and seconds % size == 0:
            return f"{seconds // size}{unit}"
    return f"{seconds}s"


def plot_deviation(stats, path):
    """Mean decryption-time deviation per encryption duration, min/max as error bars."""
    fig, ax = _new()
    xs = range(len(stats.series))
    means = [r["mean"] for r in stats.series]
    lo = [r["mean"] - r["min"] for r in stats.series]
    hi = [r["max"] - r["mean"] for r in stats.series]
    ax.errorbar(xs, means, yerr=[lo, hi], fmt="o-", capsize=3, color="tab:blue")
    ax.set_xticks(list(xs), [_duration_label(r["duration_s"]) for r in stats.series])
    ax.axhline(0, color="0.6", lw=0.8)
    ax.set_xlabel("encryption duration")
    ax.set_ylabel("deviation (s)")
    return _save(fig, path)


def plot_scalability(rows, path):
    fig, ax = _new()
    ns = [r.n for r in rows]
    ax.plot(ns, [r.publish_latency_s for r in rows], "o-", label="share publishing")
    ax.plot(ns, [r.local_verification_latency_s for r in rows], "s--", label="local verification")
    ax.set_xlabel("secret holders")
    ax.set_ylabel("latency (s)")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_vote_sweep(results, path, label=None):
    fig, ax = _new()
    ax.plot([r.l for r in results], [float(r.probability) for r in results], "-", lw=1.2, label=label)
    ax.set_xlabel("sincere voters (%)")
    ax.set_ylabel("P(winner changes)")
    ax.set_ylim(-0.02, 1.02)
    if label:
        ax.legend(frameon=False)
    return _save(fig, path)
