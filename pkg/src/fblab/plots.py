"""Standalone SVG figures: 1-D profiles, 2-D value maps and log-log fit panels."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

W, H, PAD = 480, 320, 48


def _scale(vals, lo_px, hi_px):
    vals = np.asarray(vals, dtype=float)
    lo, hi = float(np.min(vals)), float(np.max(vals))
    if hi == lo:
        hi, lo = hi + 0.5, lo - 0.5
    return lambda v: lo_px + (np.asarray(v) - lo) / (hi - lo) * (hi_px - lo_px), lo, hi


def _frame(title: str, xlabel: str, ylabel: str, xr, yr) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{PAD}" y="{PAD // 2}" width="{W - 1.5 * PAD}" height="{H - 1.5 * PAD}" fill="none" stroke="black"/>',
        f'<text x="{W / 2}" y="16" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{W / 2}" y="{H - 8}" text-anchor="middle" font-size="11">{escape(xlabel)} [{xr[0]:.3g}, {xr[1]:.3g}]</text>',
        f'<text x="12" y="{H / 2}" font-size="11" transform="rotate(-90 12 {H / 2})" text-anchor="middle">{escape(ylabel)} [{yr[0]:.3g}, {yr[1]:.3g}]</text>',
    ]


def _polyline(xs, ys, color) -> str:
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'


def profile_svg(x, u, title: str = "solution", reference=None) -> str:
    """u against x, optionally with a reference curve sampled at the same x."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    step = max(1, x.size // 1000)
    xs, us = x[::step], u[::step]
    allu = us if reference is None else np.concatenate([us, np.asarray(reference)[::step]])
    fx, *xr = _scale(xs, PAD, W - PAD / 2)
    fy, *yr = _scale(allu, H - PAD, PAD / 2)
    out = _frame(title, "x", "u", xr, yr)
    if reference is not None:
        out.append(_polyline(fx(xs), fy(np.asarray(reference)[::step]), "#d62728"))
    out.append(_polyline(fx(xs), fy(us), "#1f77b4"))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def map_svg(values2d, title: str = "solution", cells: int = 64) -> str:
    """Coarse color map of a 2-D nodal array (blue negative, white zero, red positive)."""
    A = np.asarray(values2d, dtype=float)
    si = max(1, A.shape[0] // cells)
    sj = max(1, A.shape[1] // cells)
    B = A[::si, ::sj]
    m = float(np.max(np.abs(B))) or 1.0
    ni, nj = B.shape
    cw = (W - 1.5 * PAD) / ni
    ch = (H - 1.5 * PAD) / nj
    out = _frame(title, "x", "y", (0, 1), (0, 1))
    for i in range(ni):
        for j in range(nj):
            t = B[i, j] / m
            r, g, b = (255, int(255 * (1 - t)), int(255 * (1 - t))) if t >= 0 else (int(255 * (1 + t)), int(255 * (1 + t)), 255)
            y = H - PAD - (j + 1) * ch
            out.append(f'<rect x="{PAD + i * cw:.2f}" y="{y:.2f}" width="{cw:.2f}" height="{ch:.2f}" fill="rgb({r},{g},{b})"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def loglog_svg(radii, values, slope: float, constant: float, title: str) -> str:
    """Data points and the fitted line C r^slope on log-log axes."""
    lr = np.log10(np.asarray(radii, dtype=float))
    lv = np.log10(np.asarray(values, dtype=float))
    fit = math.log10(constant) + slope * lr if constant > 0 and math.isfinite(slope) else lv
    fx, *xr = _scale(lr, PAD, W - PAD / 2)
    fy, *yr = _scale(np.concatenate([lv, fit]), H - PAD, PAD / 2)
    out = _frame(f"{title} (slope {slope:.4g})", "log10 r", "log10 value", xr, yr)
    out.append(_polyline(fx(lr), fy(fit), "#d62728"))
    for a, b in zip(fx(lr), fy(lv)):
        out.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="#1f77b4"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
