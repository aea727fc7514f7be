"""PNG rendering of solve outputs (report command only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_boundary(boundary, path, title):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ok = ~np.isnan(boundary.lambda_star)
    ax.plot(boundary.t_nodes[ok], boundary.lambda_star[ok], lw=1.6, label="critical intensity")
    ax.set_xlabel("t")
    ax.set_ylabel("lambda*")
    if np.any(~np.isnan(boundary.price_star)):
        ax2 = ax.twinx()
        okp = ~np.isnan(boundary.price_star)
        ax2.plot(
            boundary.t_nodes[okp],
            boundary.price_star[okp],
            lw=1.2,
            color="tab:red",
            label="price coordinate",
        )
        ax2.set_ylabel("price*")
    ax.set_title(f"{title} ({boundary.side})")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_surface(surface, path, title):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    tt, ll = np.meshgrid(surface.t_nodes, surface.lambda_nodes, indexing="ij")
    pc = ax.pcolormesh(tt, ll, surface.values, shading="auto", cmap="viridis")
    fig.colorbar(pc, ax=ax, label="premium")
    ax.set_xlabel("t")
    ax.set_ylabel("lambda")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_drift(t_nodes, lambda_nodes, g_vals, path, title):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    tt, ll = np.meshgrid(t_nodes, lambda_nodes, indexing="ij")
    lim = float(np.max(np.abs(g_vals))) or 1.0
    pc = ax.pcolormesh(
        tt, ll, g_vals, shading="auto", cmap="RdBu_r", vmin=-lim, vmax=lim
    )
    fig.colorbar(pc, ax=ax, label="G")
    ax.contour(tt, ll, g_vals, levels=[0.0], colors="k", linewidths=1.0)
    ax.set_xlabel("t")
    ax.set_ylabel("lambda")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
