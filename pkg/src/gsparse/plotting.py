"""Matplotlib renderings of the report tables (Agg backend, PNG files)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_stability_path", "plot_coefficient_errors", "plot_latent_velocity",
           "plot_snapshot", "plot_achievability"]


def _save(fig, path):
    fig.tight_layout()
    # fixed metadata keeps repeated renders byte-stable
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_stability_path(path, out, pi_th=0.8, highlight=()):
    fig, ax = plt.subplots(figsize=(6, 4))
    x = path.lambdas / path.lambdas[0]
    for j, name in enumerate(path.group_names):
        imp = path.importance[:, j]
        if not imp.any():
            continue
        true = name in highlight
        ax.plot(x, imp, color="tab:red" if true else "0.6", lw=1.6 if true else 0.8,
                label=name if true else None)
    ax.axhline(pi_th, ls="--", color="k", lw=0.8)
    ax.set_xscale("log")
    ax.invert_xaxis()
    ax.set_xlabel("lambda / lambda_max")
    ax.set_ylabel("importance")
    if highlight:
        ax.legend(fontsize=6, loc="lower right")
    _save(fig, out)


def plot_coefficient_errors(rows, out, key="term"):
    rows = [r for r in rows if r.get("status") != "false_positive"]
    fig, ax = plt.subplots(figsize=(max(4, 0.5 * len(rows)), 3.5))
    errs = np.array([r["error"] for r in rows], dtype=float)
    ax.bar(range(len(rows)), np.maximum(errs, 1e-16), color="tab:blue")
    ax.set_yscale("log")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels([r.get(key, r["term"]) for r in rows], rotation=60, fontsize=7)
    ax.set_ylabel("relative error")
    _save(fig, out)


def plot_latent_velocity(rows, length, out):
    x = np.linspace(0, length, 200)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(x, -1.5 + np.cos(2 * np.pi * x / length), "k-", lw=1, label="c(x)")
    ax.plot([r["x"] for r in rows], [r["c_hat"] for r in rows], "o", color="tab:red",
            label="estimate")
    ax.set_xlabel("x")
    ax.set_ylabel("velocity")
    ax.legend()
    _save(fig, out)


def plot_snapshot(field, index, out):
    names = list(field.data)
    fig, axes = plt.subplots(1, len(names), figsize=(4 * len(names), 3.6))
    for ax, s in zip(np.atleast_1d(axes), names):
        im = ax.imshow(field.data[s][index].T, origin="lower", cmap="RdBu_r",
                       extent=[field.coords["x"][0], field.coords["x"][-1],
                               field.coords["y"][0], field.coords["y"][-1]])
        ax.set_title(f"{s}, t = {field.t[index]:g}")
        fig.colorbar(im, ax=ax, shrink=0.8)
    _save(fig, out)


def plot_achievability(curves, out):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, cur in curves:
        ax.errorbar(cur.x, cur.success_prob, yerr=cur.band, marker="o", capsize=3, label=label)
    ax.set_ylim(-0.05, 1.05)
    ax.set_xlabel(curves[0][1].x_name if curves else "")
    ax.set_ylabel("success probability")
    ax.legend(fontsize=7)
    _save(fig, out)
