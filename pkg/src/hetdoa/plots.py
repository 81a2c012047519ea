"""Figure rendering for the CLI report paths. All figures go to files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_METHOD_STYLE = {
    "CBF": dict(color="k", marker="o"),
    "CBF2": dict(color="tab:red", marker="s"),
    "CBF-Phase": dict(color="tab:blue", marker="^"),
    "MUSIC": dict(color="tab:gray", marker="x"),
    "SBL": dict(color="tab:green", marker="d"),
    "SBL2": dict(color="tab:orange", marker="v"),
    "SBL2-EM": dict(color="tab:brown", marker="P"),
    "SBL3": dict(color="tab:purple", marker="*"),
}


def _style(method):
    return _METHOD_STYLE.get(method, dict(marker="."))


def save_rmse_vs_snr(records, path, title=""):
    """One RMSE-vs-SNR line per method, log-scaled RMSE axis."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    methods = sorted({r.method for r in records})
    for method in methods:
        rows = sorted((r for r in records if r.method == method),
                      key=lambda r: r.snr_db)
        snr = [r.snr_db for r in rows]
        rmse = [max(r.rmse_deg, 1e-3) for r in rows]
        ax.semilogy(snr, rmse, label=method, markersize=4, **_style(method))
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("RMSE (deg)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_rmse_vs_snapshots(records, path, title=""):
    """One RMSE-vs-L line per method."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    methods = sorted({r.method for r in records})
    for method in methods:
        rows = sorted((r for r in records if r.method == method),
                      key=lambda r: r.n_snapshots)
        ax.semilogy([r.n_snapshots for r in rows],
                    [max(r.rmse_deg, 1e-3) for r in rows],
                    label=method, markersize=4, **_style(method))
    ax.set_xlabel("snapshots L")
    ax.set_ylabel("RMSE (deg)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_spectra(spectra, path, true_doas=(), title=""):
    """Overlay angular spectra in dB, normalized to their own peaks."""
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    for spec in spectra:
        db = spec.values_db()
        ax.plot(spec.grid.angles, db - db.max(), label=spec.method_tag, lw=1.0)
    for doa in true_doas:
        ax.axvline(doa, color="0.6", ls="--", lw=0.8)
    ax.set_xlabel("DOA (deg)")
    ax.set_ylabel("power (dB re max)")
    ax.set_ylim(-40, 2)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_noise_std_heatmap(vn, path, title="noise std"):
    """Sensor-by-snapshot image of a standard-deviation matrix."""
    fig, ax = plt.subplots(figsize=(6.0, 3.2))
    im = ax.imshow(vn, aspect="auto", origin="lower", cmap="viridis")
    ax.set_xlabel("snapshot")
    ax.set_ylabel("sensor")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label="sigma")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_ratio_evolution(traces, path, title=""):
    """Mean estimated/true noise-variance ratio per iteration, per estimator."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, mean_ratio in traces.items():
        ax.plot(np.arange(1, len(mean_ratio) + 1), mean_ratio, marker=".", label=label)
    ax.axhline(1.0, color="0.5", ls="--", lw=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean variance ratio")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_ratio_histograms(hists, edges, path, title=""):
    """Small-multiple histograms of the variance ratio across iterations."""
    iters = sorted({it for (_, it) in hists})
    labels = sorted({lab for (lab, _) in hists})
    show = iters if len(iters) <= 6 else [iters[i] for i in
                                          np.linspace(0, len(iters) - 1, 6).astype(int)]
    fig, axes = plt.subplots(1, len(show), figsize=(2.2 * len(show), 2.6),
                             sharey=True, squeeze=False)
    centers = 0.5 * (np.asarray(edges[:-1]) + np.asarray(edges[1:]))
    width = float(edges[1] - edges[0])
    for ax, it in zip(axes[0], show):
        for lab in labels:
            counts = hists[(lab, it)][1:-1]  # drop sentinel bins for display
            ax.bar(centers, counts, width=width, alpha=0.5, label=lab)
        ax.set_title(f"iter {it}", fontsize=8)
        ax.tick_params(labelsize=7)
    axes[0][0].set_ylabel("count")
    axes[0][0].legend(fontsize=7)
    if title:
        fig.suptitle(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
