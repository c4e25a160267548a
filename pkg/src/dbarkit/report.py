"""Run artifacts: manifests, delimited output, and rendered figures.

Every CLI run drops a ``manifest.json`` next to its outputs recording the
command, all effective parameters (seeds included), package and library
versions, the produced files, and figure color ranges.  Figures are
rendered headlessly to PNG with a fixed colormap; masked-out cells are
drawn white.
"""

from __future__ import annotations

import csv
import datetime
import json
import platform
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

import dbarkit  # noqa: E402
from dbarkit.bie import ScatteringGrid, TruncationSpec  # noqa: E402

CMAP = "viridis"
SCAN_CMAP = "gray"


def _jsonable(value):
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_manifest(outdir, command: str, params: dict, outputs: list,
                   extras: dict | None = None) -> Path:
    import scipy

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "versions": {
            "dbarkit": dbarkit.__version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__,
            "python": platform.python_version(),
        },
        "parameters": _jsonable(params),
        "outputs": [str(Path(p).name) for p in outputs],
        "extras": _jsonable(extras or {}),
    }
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def write_table_csv(path, columns: dict) -> Path:
    """Write named columns (equal-length 1-D arrays) as CSV."""
    path = Path(path)
    names = list(columns)
    arrays = [np.asarray(columns[k]).ravel() for k in names]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*arrays):
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating))
                        else v for v in row])
    return path


def write_green_csv(path, zz: np.ndarray, values: np.ndarray) -> Path:
    """Row-major dump of a Green's-function sample: x1, x2, re, im."""
    return write_table_csv(path, {
        "x1": zz.real.ravel(), "x2": zz.imag.ravel(),
        "re": values.real.ravel(), "im": values.imag.ravel(),
    })


def heatmap_png(path, field: np.ndarray, extent, title: str, *,
                cmap: str = CMAP, mask: np.ndarray | None = None,
                symmetric: bool = False) -> dict:
    """Render a 2-D field; returns {vmin, vmax} for manifest annotation."""
    data = np.array(field, dtype=float)
    if mask is not None:
        data = np.ma.masked_array(data, mask=~mask)
    if symmetric and np.any(np.isfinite(data)):
        bound = float(np.nanmax(np.abs(data)))
        vmin, vmax = -bound, bound
    else:
        vmin = float(np.nanmin(data)) if data.size else 0.0
        vmax = float(np.nanmax(data)) if data.size else 0.0
    cm = plt.get_cmap(cmap).copy()
    cm.set_bad("white")
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    im = ax.imshow(data, origin="lower", extent=extent, cmap=cm,
                   vmin=vmin, vmax=vmax, interpolation="nearest")
    fig.colorbar(im, ax=ax)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return {"vmin": vmin, "vmax": vmax, "cmap": cmap}


def scattering_pngs(outdir, stem: str, t: ScatteringGrid,
                    spec: TruncationSpec | None = None) -> tuple[list, dict]:
    """Re/Im heatmaps of a scattering grid with the truncation ellipse."""
    s = t.grid.half_width
    extent = (-s, s - t.grid.spacing, -s, s - t.grid.spacing)
    outputs, extras = [], {}
    for part, data in (("re", t.values.real), ("im", t.values.imag)):
        path = Path(outdir) / f"{stem}_{part}.png"
        data_m = np.ma.masked_array(data, mask=~t.mask)
        cm = plt.get_cmap(CMAP).copy()
        cm.set_bad("white")
        fig, ax = plt.subplots(figsize=(5.2, 4.4))
        im = ax.imshow(data_m, origin="lower", extent=extent, cmap=cm,
                       interpolation="nearest")
        fig.colorbar(im, ax=ax)
        if spec is not None:
            th = np.linspace(0, 2 * np.pi, 400)
            r = spec.radius(th)
            ax.plot(r * np.cos(th), r * np.sin(th), "k-", lw=1.0)
        ax.set_title(f"{'Re' if part == 're' else 'Im'} t(lambda)")
        ax.set_xlabel("Re lambda")
        ax.set_ylabel("Im lambda")
        fig.tight_layout()
        fig.savefig(path, dpi=140)
        plt.close(fig)
        outputs.append(path)
        finite = data[t.mask] if np.any(t.mask) else np.zeros(1)
        extras[f"{stem}_{part}"] = {"vmin": float(np.min(finite)),
                                    "vmax": float(np.max(finite)),
                                    "cmap": CMAP}
    return outputs, extras


def curves_png(path, x, curves: dict, *, xlabel: str, ylabel: str,
               title: str, logy: bool = False) -> Path:
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    for label, y in curves.items():
        ax.plot(x, y, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if len(curves) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return Path(path)


def scan_png(path, alphas, lambda_abs, t_values, blowup) -> dict:
    """Scan map in the published style: dark negative, light positive,
    flagged/blow-up cells in red."""
    data = np.array(t_values, dtype=float)
    finite = np.isfinite(data)
    bound = float(np.percentile(np.abs(data[finite]), 98)) if finite.any() else 1.0
    cm = plt.get_cmap(SCAN_CMAP).copy()
    cm.set_bad("red")
    # rows of the image are |lambda|, columns are alpha
    shown = np.ma.masked_array(data.T, mask=~finite.T)
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    im = ax.imshow(shown, origin="lower", aspect="auto", cmap=cm,
                   vmin=-bound, vmax=bound,
                   extent=(alphas[0], alphas[-1],
                           lambda_abs[0], lambda_abs[-1]))
    ys, xs = np.nonzero(blowup)
    if ys.size:
        ax.plot(np.asarray(alphas)[ys], np.asarray(lambda_abs)[xs], "r.",
                ms=2.5)
    fig.colorbar(im, ax=ax)
    ax.set_xlabel("alpha")
    ax.set_ylabel("|lambda|")
    ax.set_title("scattering transform t(alpha, |lambda|)")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return {"vmin": -bound, "vmax": bound, "cmap": SCAN_CMAP}
