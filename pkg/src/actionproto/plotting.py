"""Figure rendering for the CLI report path.

Every figure is written next to the CSV/JSON it was drawn from. PNG metadata
is stripped so reruns produce identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
    "svg.hashsalt": "actionproto",
}


def _new(**kw):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(**kw)
    return fig, ax


def save(fig, path) -> None:
    with plt.rc_context(STYLE):
        fig.savefig(path, metadata={"Software": None}, bbox_inches="tight")
    plt.close(fig)


def effect_classes(motions, labels, path, title="Effect classes in motion space"):
    """Samples in (angle, magnitude) coloured by their effect class."""
    motions = np.asarray(motions)
    labels = np.asarray(labels)
    fig, ax = _new()
    cmap = plt.get_cmap("tab10")
    for k in np.unique(labels):
        m = motions[labels == k]
        ax.scatter(m[:, 0], m[:, 1], s=4, color=cmap(int(k) % 10), label=f"C{int(k)}")
    ax.set_xlabel("launch angle [rad]")
    ax.set_ylabel("impulse [N s]")
    ax.set_title(title)
    ax.legend(markerscale=3, loc="best", ncol=2)
    save(fig, path)


def effect_scatter(effects, labels, feature_names, path):
    effects = np.asarray(effects)
    fig, ax = _new()
    ax.scatter(effects[:, 0], effects[:, 1], c=np.asarray(labels) % 10, cmap="tab10",
               vmin=0, vmax=9, s=4)
    ax.set_xlabel(f"effect {feature_names[0]}")
    ax.set_ylabel(f"effect {feature_names[1]}")
    save(fig, path)


def histogram(rows, path, feature):
    """Bar chart from ``(bin_left, bin_right, count)`` rows."""
    left = np.array([r[0] for r in rows])
    right = np.array([r[1] for r in rows])
    counts = np.array([r[2] for r in rows])
    fig, ax = _new()
    ax.bar(left, counts, width=np.maximum(right - left, 1e-12), align="edge")
    ax.set_xlabel(f"effect {feature}")
    ax.set_ylabel("samples")
    save(fig, path)


def prototypes(background_motions, background_labels, protos, path, title=""):
    fig, ax = _new()
    if background_motions is not None and len(background_motions):
        bm = np.asarray(background_motions)
        ax.scatter(bm[:, 0], bm[:, 1], c=np.asarray(background_labels) % 10, cmap="tab10",
                   vmin=0, vmax=9, s=3, alpha=0.25)
    pm = np.array([[p.motion.angle, p.motion.magnitude] for p in protos]).reshape(-1, 2)
    ax.scatter(pm[:, 0], pm[:, 1], marker="h", s=60, facecolor="none", edgecolor="k")
    ax.set_xlabel("launch angle [rad]")
    ax.set_ylabel("impulse [N s]")
    ax.set_title(title or f"{len(pm)} prototypes")
    save(fig, path)


def trajectories(trajs, geometry, path, labels=None):
    fig, ax = _new()
    # staircase outline
    xs, zs = [0.0], [0.0]
    for i in range(1, geometry.num_steps + 1):
        r = geometry.riser(i)
        xs += [r, r]
        zs += [(i - 1) * geometry.step_height, i * geometry.step_height]
    xs.append(geometry.end + geometry.step_depth)
    zs.append(geometry.top_height)
    ax.plot(xs, zs, color="0.3", lw=1.5)
    for i, tr in enumerate(trajs):
        pts = np.array(tr.points)
        ax.plot(pts[:, 1], pts[:, 2], lw=1, label=None if labels is None else labels[i])
    ax.set_xlabel("y [m]")
    ax.set_ylabel("z [m]")
    ax.set_aspect("equal", adjustable="datalim")
    save(fig, path)


def learning_curves(curves: dict, offsets: dict, path, ceiling=None, warmup=None):
    fig, ax = _new()
    for name, c in curves.items():
        x = np.array(c.steps) + offsets.get(name, 0)
        m, s = c.mean, c.std
        ax.plot(x, m, label=name)
        ax.fill_between(x, m - s, m + s, alpha=0.2)
    if ceiling is not None:
        ax.axhline(ceiling, ls="--", color="g", lw=1, label="ceiling")
    if warmup is not None:
        ax.axvline(warmup, ls="--", color="b", lw=1)
        off = offsets.get("effect")
        if off:
            ax.axvline(warmup + off, ls="--", color="r", lw=1)
    ax.set_xlabel("environment steps")
    ax.set_ylabel("mean evaluation return")
    ax.legend(loc="best")
    save(fig, path)
