"""Deterministic SVG figures.

Figures have a fixed size, no creation date and a fixed hash salt for
element ids, so identical data gives byte-identical files. Data series
are grouped under the ids ``series-0``, ``series-1`` and so on.
"""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["emit_plot", "PLOT_KINDS", "PlotError"]

PLOT_KINDS = ("scatter", "line", "bifurcation", "ring")


class PlotError(OSError):
    """Plot could not be produced or written."""


_RC = {"svg.hashsalt": "btfold", "svg.fonttype": "path", "font.family": "DejaVu Sans",
       "figure.figsize": (6.4, 4.8), "figure.dpi": 100, "path.simplify": False}


def emit_plot(data, kind, path, title=None, xlabel=None, ylabel=None, log_x=False):
    """Render ``data`` to an SVG file.

    Parameters
    ----------
    data : dict
        ``scatter``/``line``: keys ``x`` and ``y`` (one series) or
        ``series``, a list of dicts with ``x``, ``y`` and ``label``.
        ``bifurcation``: ``x`` (parameter per sample) and ``y`` (section value).
        ``ring``: ``curves``, a list of ``(n, 2)`` arrays, with optional
        ``rect`` ``((x0, x1), (z0, z1))`` and ``center``.
    kind : {'scatter', 'line', 'bifurcation', 'ring'}
    path : str

    Raises
    ------
    PlotError
        Empty data or unwritable path.
    ValueError
        Unknown kind.
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"kind must be one of {PLOT_KINDS}")
    series = _series(data, kind)
    if not series:
        raise PlotError("no data to plot")
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots()
        try:
            if kind == "ring":
                for i, s in enumerate(series):
                    c = np.asarray(s["xy"], float)
                    ax.plot(c[:, 0], c[:, 1], "-", lw=0.8, gid=f"series-{i}")
                if data.get("rect") is not None:
                    (a, b), (c0, c1) = data["rect"]
                    ax.plot([a, b, b, a, a], [c0, c0, c1, c1, c0], "k-", lw=1.0)
                if data.get("center") is not None:
                    ax.plot([data["center"][0]], [data["center"][1]], "k+")
            else:
                for i, s in enumerate(series):
                    x, y = np.asarray(s["x"], float), np.asarray(s["y"], float)
                    gid = f"series-{i}"
                    if kind == "line":
                        ax.plot(x, y, "-o", ms=3, label=s.get("label"), gid=gid)
                    elif kind == "scatter":
                        ax.plot(x, y, "o", ms=3, label=s.get("label"), gid=gid)
                    else:
                        ax.plot(x, y, ".", ms=1.5, color="k", gid=gid)
                if kind != "bifurcation" and any(s.get("label") for s in series):
                    ax.legend()
            if log_x:
                ax.set_xscale("log")
            if title:
                ax.set_title(title)
            if xlabel:
                ax.set_xlabel(xlabel)
            if ylabel:
                ax.set_ylabel(ylabel)
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise PlotError(f"cannot write {path}: {exc}") from exc
        finally:
            plt.close(fig)
    return path


def _series(data, kind):
    if not data:
        return []
    if kind == "ring":
        return [{"xy": c} for c in data.get("curves", []) if len(c)]
    if "series" in data:
        return [s for s in data["series"] if len(s["x"])]
    if len(data.get("x", [])) == 0:
        return []
    return [{"x": data["x"], "y": data["y"], "label": data.get("label")}]
