"""Report files and figures: JSON/CSV writers, matplotlib renders, manifest."""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def write_json(path: Path, payload: dict) -> None:
    def default(obj):
        if isinstance(obj, np.ndarray):
            if np.iscomplexobj(obj):
                return {"re": obj.real.tolist(), "im": obj.imag.tolist()}
            return obj.tolist()
        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
        if isinstance(obj, complex):
            return {"re": obj.real, "im": obj.imag}
        raise TypeError(f"not serializable: {type(obj)}")

    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, default=default)
        fh.write("\n")


def write_csv(path: Path, columns: dict) -> None:
    names = list(columns)
    rows = len(next(iter(columns.values())))
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for i in range(rows):
            fh.write(",".join(_fmt(columns[c][i]) for c in names) + "\n")


class OutputDir:
    """Collects artifacts and writes the run manifest."""

    def __init__(self, root, config_blob: bytes | None = None, figures: bool = True):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.figures = figures
        self.outputs = {}
        self.summary = {}
        self.config_sha = hashlib.sha256(config_blob).hexdigest() if config_blob else None

    def path(self, name: str) -> Path:
        return self.root / name

    def register(self, name: str, kind: str) -> None:
        p = self.root / name
        digest = hashlib.sha256(p.read_bytes()).hexdigest()
        self.outputs[name] = {"sha256": digest, "kind": kind}

    def json(self, name: str, payload: dict) -> None:
        write_json(self.root / name, payload)
        self.register(name, "json")

    def csv(self, name: str, columns: dict) -> None:
        write_csv(self.root / name, columns)
        self.register(name, "csv")

    def field(self, name: str, fld) -> None:
        from .fieldio import write_field

        write_field(self.root / name, fld)
        self.register(name, "field")

    def figure(self, name: str, fig) -> None:
        if not self.figures:
            plt.close(fig)
            return
        fig.savefig(self.root / name, dpi=130)
        plt.close(fig)
        self.register(name, "figure")

    def finalize(self, command: str, residual_summary: dict | None = None) -> None:
        from . import __version__

        manifest = {
            "command": command,
            "created": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
            "package_version": __version__,
            "config_sha256": self.config_sha,
            "outputs": self.outputs,
            "summary": self.summary,
        }
        if residual_summary:
            manifest["residuals"] = residual_summary
        write_json(self.root / "manifest.json", manifest)


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------


def spectrum_figure(levels, e0, e1):
    fig, ax = plt.subplots(figsize=(5, 4))
    for lv in levels:
        ax.hlines(lv.energy, 0.2, 0.8, lw=2)
        ax.annotate(f"m={lv.multiplicity}", (0.82, lv.energy), fontsize=9, va="center")
    ax.axhline(0.0, color="k", lw=0.8, ls=":")
    if e0 is not None and e1 is not None:
        ax.annotate(f"2e1-e0 = {2 * e1 - e0:+.4f}", (0.05, 0.93), xycoords="axes fraction")
    ax.set_xlim(0, 1.15)
    ax.set_xticks([])
    ax.set_ylabel("energy")
    ax.set_title("bound levels of -Delta + V")
    fig.tight_layout()
    return fig


def branch_figure(lambdas, norms2, e0_abs):
    fig, axes = plt.subplots(1, 2, figsize=(8.4, 3.6))
    axes[0].plot(lambdas, norms2, "o-", ms=3)
    axes[0].set_xlabel("lambda")
    axes[0].set_ylabel("||phi||^2")
    axes[0].set_title("mass along the branch")
    amp = np.sqrt(np.maximum(norms2, 0)) / np.sqrt(np.abs(lambdas - e0_abs))
    axes[1].plot(lambdas - e0_abs, amp, "o-", ms=3)
    axes[1].set_xlabel("lambda - |e0|")
    axes[1].set_ylabel("||phi|| / |lambda-|e0||^{1/2}")
    axes[1].set_title("bifurcation scaling")
    fig.tight_layout()
    return fig


def gamma_figure(G1, K, err):
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    im = ax.imshow(np.real(G1), cmap="viridis")
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_title(f"Gamma(e1); K = {K:.3e} (rel err {err:.1e})")
    ax.set_xticks(range(G1.shape[0]))
    ax.set_yticks(range(G1.shape[0]))
    fig.tight_layout()
    return fig


def decay_figure(series, fits=None, title="decay"):
    """series: list of (t, values, label); fits: list of DecayFit or None."""
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    for (t, v, label) in series:
        t = np.asarray(t)
        v = np.asarray(v)
        mask = (t > 0) & (v > 0)
        ax.loglog(t[mask], v[mask], lw=1.2, label=label)
    if fits:
        for fit in fits:
            if fit is None:
                continue
            tt = np.geomspace(fit.window[0], fit.window[1], 40)
            ax.loglog(tt, fit.amplitude * tt ** (-fit.exponent), "k--", lw=1.0,
                      label=f"t^-{fit.exponent:.3f}")
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    ax.set_title(title)
    fig.tight_layout()
    return fig


def simulate_figure(run):
    fig, axes = plt.subplots(2, 2, figsize=(9.6, 7.0))
    t = run.times
    m = t > 0
    axes[0, 0].loglog(t[m], run.z_abs[m], lw=1.2)
    axes[0, 0].set_title("|z(t)|")
    if "z" in run.fits:
        f = run.fits["z"]
        tt = np.geomspace(*f.window, 40)
        axes[0, 0].loglog(tt, f.amplitude * tt ** (-f.exponent), "k--", label=f"t^-{f.exponent:.3f}")
        axes[0, 0].legend(fontsize=8)
    axes[0, 1].loglog(t[m & (run.r_weighted > 0)], run.r_weighted[m & (run.r_weighted > 0)], lw=1.2, color="C1")
    axes[0, 1].set_title("weighted radiation norm")
    if "r_weighted" in run.fits:
        f = run.fits["r_weighted"]
        tt = np.geomspace(*f.window, 40)
        axes[0, 1].loglog(tt, f.amplitude * tt ** (-f.exponent), "k--", label=f"t^-{f.exponent:.3f}")
        axes[0, 1].legend(fontsize=8)
    axes[1, 0].plot(t, run.lam, lw=1.0, color="C2")
    axes[1, 0].set_title("lambda(t)")
    axes[1, 0].set_xlabel("t")
    drift = np.abs(run.mass / run.mass[0] - 1.0)
    axes[1, 1].semilogy(t, np.maximum(drift, 1e-17), lw=1.0, color="C3")
    axes[1, 1].set_title("relative mass drift")
    axes[1, 1].set_xlabel("t")
    for ax in axes.flat:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    return fig
