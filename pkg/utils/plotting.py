"""
Static log-log SVG plots of experiment series.
"""

import logging
from pathlib import Path
from typing import Optional

import matplotlib

# Non-interactive backend for headless runs
matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)

# Fixed salt and no timestamp keep SVG output identical across reruns
SVG_HASH_SALT = "pmlab"


def setup_style() -> None:
    plt.rcParams.update({
        "font.family": "sans-serif",
        "font.size": 10,
        "axes.labelsize": 12,
        "axes.titlesize": 13,
        "axes.spines.top": False,
        "axes.spines.right": False,
        "axes.grid": True,
        "grid.alpha": 0.2,
        "svg.hashsalt": SVG_HASH_SALT,
        "svg.fonttype": "none",
    })


def loglog_svg(
    path: Path,
    x: np.ndarray,
    y: np.ndarray,
    xlabel: str,
    ylabel: str,
    guide_slope: Optional[float] = None,
    title: str = "",
) -> Optional[Path]:
    """
    Plot y against x on log-log axes, with a guide line of slope guide_slope
    anchored at the last point. Non-positive points are dropped.

    Returns:
        Path of the SVG, or None when no point is positive
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0.0) & (y > 0.0) & np.isfinite(y)
    if not np.any(keep):
        logger.warning(f"Nothing to plot for {path}")
        return None
    x, y = x[keep], y[keep]

    setup_style()
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.loglog(x, y, "o-", markersize=3, linewidth=1, label=ylabel)
    if guide_slope is not None:
        guide = y[-1] * (x / x[-1]) ** guide_slope
        ax.loglog(x, guide, "--", color="gray", linewidth=1, label=f"slope {guide_slope:.3g}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend()

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", bbox_inches="tight", facecolor="white", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"Plot written to {path}")
    return path
