"""
plotutils.py

SVG figures of a run: resource levels with their set points, fatigues,
the deviation loss L_J and the agent's track in the arena.

The SVGs are pure functions of the log. The hash salt is pinned and the
date metadata dropped, so emitting twice gives identical bytes.
"""

####################
# Standard libraries
####################
import os
from typing import List, Optional, Sequence

#######################
# Third party libraries
#######################
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # pylint: disable=wrong-import-position
import numpy as np  # pylint: disable=wrong-import-position

#################
# Local libraries
#################
from contracts import require  # pylint: disable=wrong-import-position
from envutils import Arena  # pylint: disable=wrong-import-position
from logutils import verbose_log  # pylint: disable=wrong-import-position
from telemetryutils import EpisodeLog  # pylint: disable=wrong-import-position

PLOT_FILES = ("resources.svg", "fatigue.svg", "loss_j.svg", "track.svg")
SVG_SALT = "ctcs-hrrl"


def _style(count: int) -> dict:
    # a single point draws no line, so mark it
    return {"marker": "o", "linestyle": "none"} if count == 1 else {"linewidth": 0.8}


def _save(fig, path, verbose: bool):
    try:
        with matplotlib.rc_context({"svg.hashsalt": SVG_SALT}):
            fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OSError(f"Unable to write plot: {path}") from exc
    finally:
        plt.close(fig)
    if verbose:
        verbose_log(f"Saved plot: {path}")


def emit_plots(log: EpisodeLog, out_dir, **kwargs) -> List[str]:
    """
    Write the four SVG plots into `out_dir` and return their paths

    Kwargs:
        :param stride
            Keep one record every `stride` steps (default 1)
        :param setpoints
            Set points of resource 1 and 2, drawn dashed (default (1, 2))
        :param arena
            Arena whose bounds and resource circles frame the track
        :param verbose
            Apply verbose or not
    """
    require(len(log) > 0, "cannot plot an empty log")
    stride: int = kwargs.get("stride", 1)
    setpoints: Sequence[float] = kwargs.get("setpoints", (1.0, 2.0))
    arena: Optional[Arena] = kwargs.get("arena") or Arena()
    verbose = kwargs.get("verbose")
    require(stride >= 1, f"stride must be >= 1, got {stride}")

    records = log.records[::stride]
    count = len(records)
    steps = np.array([r.k for r in records])

    def series(name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in records], dtype=float)

    paths = [os.path.join(out_dir, name) for name in PLOT_FILES]

    fig, axis = plt.subplots(figsize=(7, 4))
    axis.plot(steps, series("level_1"), color="black", label="resource 1", **_style(count))
    axis.plot(steps, series("level_2"), color="red", label="resource 2", **_style(count))
    axis.axhline(setpoints[0], color="black", linestyle="--", linewidth=0.8)
    axis.axhline(setpoints[1], color="red", linestyle="--", linewidth=0.8)
    axis.set_xlabel("iteration")
    axis.set_ylabel("level")
    axis.set_title("Resource levels")
    axis.legend(loc="best")
    _save(fig, paths[0], verbose)

    fig, axis = plt.subplots(figsize=(7, 4))
    axis.plot(steps, series("f_m"), color="tab:blue", label="muscular fatigue", **_style(count))
    axis.plot(steps, series("f_s"), color="tab:orange", label="sleep fatigue", **_style(count))
    axis.set_xlabel("iteration")
    axis.set_ylabel("fatigue")
    axis.set_title("Fatigue")
    axis.legend(loc="best")
    _save(fig, paths[1], verbose)

    fig, axis = plt.subplots(figsize=(7, 4))
    axis.plot(steps, series("loss_j"), color="tab:green", **_style(count))
    axis.set_xlabel("iteration")
    axis.set_ylabel("L_J")
    axis.set_title("Deviation function loss")
    _save(fig, paths[2], verbose)

    fig, axis = plt.subplots(figsize=(5, 5))
    for resource in arena.resources:
        axis.add_patch(
            plt.Circle(resource.center, resource.radius, fill=False, color="tab:blue")
        )
        axis.annotate(f"R{resource.index}", resource.center, ha="center", va="center")
    axis.plot(series("pos_x"), series("pos_y"), color="grey", **_style(count))
    axis.plot(series("pos_x")[-1:], series("pos_y")[-1:], "o", color="black")
    axis.set_xlim(0.0, arena.side)
    axis.set_ylim(0.0, arena.side)
    axis.set_aspect("equal")
    axis.set_title("Agent track")
    _save(fig, paths[3], verbose)

    return paths
