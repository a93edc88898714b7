"""Figure presets for force-displacement curves.

All styling lives in one preset table so identical inputs render identical
figures. ``plot_curves`` returns the annotated extrema per input, which by
construction equal an independent scan of the parsed CSV records.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .curves import load_curve

_CYCLE = ("tab:red", "tab:blue", "tab:green", "tab:purple", "tab:orange", "black")

STYLE_PRESETS = {
    "single": dict(
        title="Force-displacement curve",
        annotate=True, per_branch=False, log_x=False,
    ),
    "dual-branch": dict(
        title="Contact and separated equilibrium branches",
        annotate=True, per_branch=True, log_x=False,
    ),
    "e-overlay": dict(
        title="Stiffness study, shared normalization",
        annotate=False, per_branch=False, log_x=False,
    ),
    "e-overlay-per-e": dict(
        title="Stiffness study, per-modulus normalization",
        annotate=False, per_branch=False, log_x=False,
    ),
    "mesh-overlay": dict(
        title="Mesh refinement study",
        annotate=False, per_branch=False, log_x=False,
    ),
    "lj-vs-elstat": dict(
        title="Lennard-Jones vs electrostatic adhesion",
        annotate=True, per_branch=False, log_x=False,
    ),
}

_BRANCH_STYLE = {
    "contact": dict(color="tab:red", marker=".", linestyle="-"),
    "separated": dict(color="black", marker="s", linestyle="--", markersize=3),
    "unstable": dict(color="tab:gray", marker="^", linestyle=":", markersize=4),
}


def _annotate_extrema(ax, curve, scale=1.0):
    u_max, f_max, u_min, f_min = curve.extrema()
    f_max *= scale
    f_min *= scale
    ax.annotate(f"({u_max:.3g}, {f_max:.4g})", xy=(u_max, f_max),
                textcoords="offset points", xytext=(4, 6), fontsize=7)
    ax.annotate(f"({u_min:.3g}, {f_min:.4g})", xy=(u_min, f_min),
                textcoords="offset points", xytext=(4, -10), fontsize=7)
    return {"u_at_max": u_max, "f_max": f_max, "u_at_min": u_min, "f_min": f_min}


def plot_curves(paths, style, out_path, labels=None, rescale=None):
    """Render the named preset from curve CSVs into ``out_path``.

    ``rescale`` optionally multiplies each curve's normalized force (used for
    per-modulus normalization). Returns per-input metadata including the
    annotated extrema.
    """
    if style not in STYLE_PRESETS:
        raise ValueError(f"unknown style preset '{style}'; know {sorted(STYLE_PRESETS)}")
    if not paths:
        raise ValueError("need at least one curve file")
    preset = STYLE_PRESETS[style]
    curves = [load_curve(p) for p in paths]
    if labels is not None and len(labels) != len(curves):
        raise ValueError("one label per input required")
    if rescale is None:
        rescale = [1.0] * len(curves)
    if len(rescale) != len(curves):
        raise ValueError("one rescale factor per input required")

    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=150)
    meta = []
    for k, curve in enumerate(curves):
        label = labels[k] if labels else curve.label
        f = curve.f_x_normalized * rescale[k]
        if preset["per_branch"]:
            style_kw = dict(markersize=4)
            style_kw.update(_BRANCH_STYLE.get(curve.branch[0], {}))
            ax.plot(curve.u_x_over_l, f, label=f"{label} ({curve.branch[0]})",
                    **style_kw)
            # branch terminus marker at the last record
            ax.plot(curve.u_x_over_l[-1], f[-1], marker="x", markersize=9,
                    color=style_kw.get("color", "black"), linestyle="none")
        else:
            color = _CYCLE[k % len(_CYCLE)]
            ax.plot(curve.u_x_over_l, f, label=label, color=color,
                    marker=".", markersize=3, linewidth=1.2)
        entry = {"path": curve.path, "label": label}
        if preset["annotate"]:
            entry.update(_annotate_extrema(ax, curve, rescale[k]))
        meta.append(entry)

    ax.set_xlabel("support separation $u_x/l$")
    ax.set_ylabel("normalized force $F_x/F_{ref}$")
    ax.set_title(preset["title"])
    ax.axhline(0.0, color="0.8", linewidth=0.8, zorder=0)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, metadata={"Software": "plotgen"})
    plt.close(fig)
    return meta
