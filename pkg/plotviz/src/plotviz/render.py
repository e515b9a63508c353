"""Figure construction: one axes per panel, one curve per block."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")  # select before pyplot so imports stay headless

import matplotlib.pyplot as plt

SHARED_STYLE = {"color": "#c44e52", "linewidth": 1.8, "zorder": 3}
INDIVIDUAL_STYLE = {"color": "#4c72b0", "linewidth": 0.9, "alpha": 0.55}


def default_grid(n_panels):
    """Near-square layout; four panels get the conventional 2x2."""
    if n_panels <= 1:
        return (1, 1)
    if n_panels == 2:
        return (1, 2)
    if n_panels <= 4:
        return (2, 2)
    cols = 3
    return (math.ceil(n_panels / cols), cols)


def draw_panel(ax, panel, log_scale=True):
    """Plot every block-error curve of one PanelTrace onto ax."""
    labeled_individual = False
    for j, g in enumerate(panel.block_ids):
        y = panel.block_errors[:, j]
        if g == 0:
            ax.plot(panel.iterations, y, label="shared block", **SHARED_STYLE)
        else:
            label = None if labeled_individual else "individual blocks"
            labeled_individual = True
            ax.plot(panel.iterations, y, label=label, **INDIVIDUAL_STYLE)
    if log_scale:
        ax.set_yscale("log")
    ax.set_title(panel.name)
    ax.set_xlabel("iteration")
    ax.set_ylabel("normalized squared error")
    ax.legend(loc="best", fontsize="small")


def build_figure(traces, log_scale=True):
    """Assemble the panel grid for a TraceFileSet and return the figure."""
    rows, cols = traces.layout or default_grid(len(traces.panels))
    fig, axes = plt.subplots(
        rows, cols, figsize=(5.2 * cols, 3.9 * rows), squeeze=False
    )
    flat = axes.ravel()
    for ax, panel in zip(flat, traces.panels):
        draw_panel(ax, panel, log_scale=log_scale)
    for ax in flat[len(traces.panels):]:
        ax.set_axis_off()
    fig.tight_layout()
    return fig


def render_convergence(traces, log_scale=True, out_image_path="figure.png",
                       dpi=150):
    """Render a TraceFileSet to an image file and return its path.

    Pure function of the CSV contents and layout: rerunning with the
    same inputs writes identical bytes.
    """
    fig = build_figure(traces, log_scale=log_scale)
    try:
        fig.savefig(out_image_path, dpi=dpi)
    finally:
        plt.close(fig)
    return out_image_path
