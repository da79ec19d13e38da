"""Minimal self-contained SVG plots (no plotting dependency)."""
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
W, H = 640, 420
ML, MR, MT, MB = 70, 150, 40, 50


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, n)


def _axes(parts, xlo, xhi, ylo, yhi, xlabel, ylabel, title):
    pw, ph = W - ML - MR, H - MT - MB
    parts.append(f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>')
    for v in _ticks(xlo, xhi):
        x = ML + (v - xlo) / (xhi - xlo) * pw
        parts.append(f'<text x="{x:.1f}" y="{H - MB + 16}" font-size="11" text-anchor="middle">{v:.4g}</text>')
    for v in _ticks(ylo, yhi):
        y = MT + ph - (v - ylo) / (yhi - ylo) * ph
        parts.append(f'<text x="{ML - 6}" y="{y + 4:.1f}" font-size="11" text-anchor="end">{v:.4g}</text>')
        parts.append(f'<line x1="{ML}" x2="{ML + pw}" y1="{y:.1f}" y2="{y:.1f}" stroke="#ddd"/>')
    parts.append(f'<text x="{ML + pw / 2}" y="{H - 12}" font-size="12" text-anchor="middle">{escape(xlabel)}</text>')
    parts.append(
        f'<text x="16" y="{MT + ph / 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 16 {MT + ph / 2})">{escape(ylabel)}</text>'
    )
    parts.append(f'<text x="{W / 2}" y="22" font-size="14" text-anchor="middle">{escape(title)}</text>')


def _write(path, parts):
    head = f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">'
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join([head, f'<rect width="{W}" height="{H}" fill="white"/>', *parts, "</svg>"]) + "\n")


def write_convergence_svg(path, curves, title=""):
    """``curves`` maps a label to ``(mean, stderr)`` arrays over iterations; bands show +-1 stderr."""
    lo = min(float(np.min(m - s)) for m, s in curves.values())
    hi = max(float(np.max(m + s)) for m, s in curves.values())
    pad = 0.05 * (hi - lo or 1.0)
    lo, hi = lo - pad, hi + pad
    T = max(len(m) for m, _ in curves.values())
    pw, ph = W - ML - MR, H - MT - MB

    def xy(i, v):
        x = ML + (i - 1) / max(T - 1, 1) * pw
        y = MT + ph - (v - lo) / (hi - lo) * ph
        return f"{x:.2f},{y:.2f}"

    parts = []
    _axes(parts, 1, T, lo, hi, "iteration", "best reward", title)
    for k, (label, (mean, se)) in enumerate(curves.items()):
        color = PALETTE[k % len(PALETTE)]
        it = range(1, len(mean) + 1)
        upper = [xy(i, m + s) for i, m, s in zip(it, mean, se)]
        lower = [xy(i, m - s) for i, m, s in zip(it, mean, se)]
        parts.append(f'<polygon points="{" ".join(upper + lower[::-1])}" fill="{color}" fill-opacity="0.2"/>')
        line = " ".join(xy(i, m) for i, m in zip(it, mean))
        parts.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="1.8"/>')
        ly = MT + 14 + 18 * k
        parts.append(f'<line x1="{W - MR + 10}" x2="{W - MR + 30}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="3"/>')
        parts.append(f'<text x="{W - MR + 35}" y="{ly + 4}" font-size="11">{escape(label)}</text>')
    _write(path, parts)


def write_histogram_svg(path, counts, title=""):
    """Grouped bars of head counts per action, one colour per context."""
    counts = np.asarray(counts, dtype=float)
    C, A = counts.shape
    hi = float(counts.max()) or 1.0
    pw, ph = W - ML - MR, H - MT - MB
    parts = []
    _axes(parts, 0, A - 1 if A > 1 else 1, 0, hi, "action", "agents", title)
    slot = pw / A
    bw = slot * 0.8 / C
    for c in range(C):
        color = PALETTE[c % len(PALETTE)]
        for a in range(A):
            h = counts[c, a] / hi * ph
            x = ML + a * slot + 0.1 * slot + c * bw
            parts.append(f'<rect x="{x:.2f}" y="{MT + ph - h:.2f}" width="{bw:.2f}" height="{h:.2f}" fill="{color}"/>')
        ly = MT + 14 + 18 * c
        parts.append(f'<rect x="{W - MR + 10}" y="{ly - 6}" width="20" height="10" fill="{color}"/>')
        parts.append(f'<text x="{W - MR + 35}" y="{ly + 4}" font-size="11">context {c}</text>')
    _write(path, parts)
