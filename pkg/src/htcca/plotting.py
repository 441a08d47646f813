"""Matplotlib renderings of benchmark series.

Figures are built with the object-oriented API (no pyplot state), so these
functions are safe to call from worker threads and never open a window.
"""

from pathlib import Path

from matplotlib.figure import Figure

METHOD_STYLE = {
    "cca": dict(color="0.5", marker="x", label="CCA"),
    "ttcca": dict(color="tab:green", marker="^", label="tt-CCA"),
    "tdcca": dict(color="tab:blue", marker="s", label="TDCCA"),
    "htcca": dict(color="tab:red", marker="o", label="HTCCA"),
}


def _style(method):
    return METHOD_STYLE.get(method, dict(marker=".", label=method))


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    return path


def plot_accuracy_vs_trials(rows, path, title=None) -> Path:
    """Mean accuracy (+/- standard error) against number of training trials.

    Args:
        rows: Dicts with method, n_training_trials, mean_accuracy, se_accuracy.
            Untrained methods (n_training_trials == 0) are drawn as a flat band.
    """
    fig = Figure(figsize=(5.0, 3.6))
    ax = fig.add_subplot()
    trained = sorted({r["n_training_trials"] for r in rows if r["n_training_trials"] > 0})
    for method in dict.fromkeys(r["method"] for r in rows):
        sub = sorted((r for r in rows if r["method"] == method),
                     key=lambda r: r["n_training_trials"])
        if all(r["n_training_trials"] == 0 for r in sub) and trained:
            r = sub[0]
            ax.axhline(100 * r["mean_accuracy"], ls="--", lw=1, color=_style(method).get("color"),
                       label=_style(method)["label"])
            continue
        ax.errorbar([r["n_training_trials"] for r in sub],
                    [100 * r["mean_accuracy"] for r in sub],
                    yerr=[100 * r["se_accuracy"] for r in sub], capsize=3, **_style(method))
    ax.set_xlabel("Number of training trials")
    ax.set_ylabel("Accuracy (%)")
    if trained:
        ax.set_xticks(trained)
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, path)


def plot_window_curves(rows, path, title=None) -> Path:
    """Accuracy and ITR against data length, one line per method.

    Args:
        rows: Dicts with method, window, mean_accuracy, se_accuracy, mean_itr,
            se_itr; typically one N_t already filtered out.
    """
    fig = Figure(figsize=(9.0, 3.6))
    ax_acc, ax_itr = fig.subplots(1, 2)
    for method in dict.fromkeys(r["method"] for r in rows):
        sub = sorted((r for r in rows if r["method"] == method), key=lambda r: r["window"])
        x = [r["window"] for r in sub]
        ax_acc.errorbar(x, [100 * r["mean_accuracy"] for r in sub],
                        yerr=[100 * r["se_accuracy"] for r in sub], capsize=3, **_style(method))
        ax_itr.errorbar(x, [r["mean_itr"] for r in sub],
                        yerr=[r["se_itr"] for r in sub], capsize=3, **_style(method))
    ax_acc.set_ylabel("Accuracy (%)")
    ax_itr.set_ylabel("ITR (bits/min)")
    for ax in (ax_acc, ax_itr):
        ax.set_xlabel("Data length (s)")
    ax_acc.legend(frameon=False)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, path)
