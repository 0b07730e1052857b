"""Minimal dependency-free SVG emitters for heat maps and line panels."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

FONT = 'font-family="sans-serif" font-size="11"'


def _fmt(v):
    return f"{v:.6g}"


def _doc(width, height, body):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white" class="background"/>\n'
        + "\n".join(body)
        + "\n</svg>\n"
    )


def write(path, text):
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path


def heatmap(matrix, row_labels, col_labels, title="", row_title="", col_title="", cell=60):
    """Grayscale heat map: min maps to white, max to black; a constant matrix is mid-gray."""
    m = np.asarray(matrix, dtype=float)
    nr, nc = m.shape
    left, top = 80, 50
    width = left + nc * cell + 30
    height = top + nr * cell + 60
    lo, hi = float(np.min(m)), float(np.max(m))
    body = []
    if title:
        body.append(f'<text x="{width / 2}" y="20" text-anchor="middle" {FONT}>{escape(title)}</text>')
    for i in range(nr):
        for j in range(nc):
            frac = 0.5 if hi == lo else (m[i, j] - lo) / (hi - lo)
            g = int(round(255 * (1.0 - frac)))
            x, y = left + j * cell, top + i * cell
            body.append(
                f'<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="rgb({g},{g},{g})" data-value="{m[i, j]!r}"/>'
            )
            tc = "black" if g > 127 else "white"
            body.append(
                f'<text x="{x + cell / 2}" y="{y + cell / 2 + 4}" text-anchor="middle" '
                f'fill="{tc}" {FONT}>{m[i, j]:.3f}</text>'
            )
    for i, lab in enumerate(row_labels):
        body.append(
            f'<text x="{left - 8}" y="{top + i * cell + cell / 2 + 4}" text-anchor="end" {FONT}>{escape(str(lab))}</text>'
        )
    for j, lab in enumerate(col_labels):
        body.append(
            f'<text x="{left + j * cell + cell / 2}" y="{top + nr * cell + 16}" text-anchor="middle" {FONT}>{escape(str(lab))}</text>'
        )
    if col_title:
        body.append(
            f'<text x="{left + nc * cell / 2}" y="{top + nr * cell + 40}" text-anchor="middle" {FONT}>{escape(col_title)}</text>'
        )
    if row_title:
        body.append(
            f'<text x="16" y="{top + nr * cell / 2}" text-anchor="middle" {FONT} '
            f'transform="rotate(-90 16 {top + nr * cell / 2})">{escape(row_title)}</text>'
        )
    return _doc(width, height, body)


@dataclass
class Panel:
    """One set of axes.  Each layer is (kind, x, y, style) with kind in line|points|bars|band."""

    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    logx: bool = False
    layers: list = field(default_factory=list)

    def line(self, x, y, color="black", dash=None):
        self.layers.append(("line", np.asarray(x, float), np.asarray(y, float), {"color": color, "dash": dash}))
        return self

    def points(self, x, y, color="black"):
        self.layers.append(("points", np.asarray(x, float), np.asarray(y, float), {"color": color}))
        return self

    def bars(self, edges, heights, color="#bbbbbb"):
        self.layers.append(("bars", np.asarray(edges, float), np.asarray(heights, float), {"color": color}))
        return self

    def band(self, x, lo, hi, color="#dddddd"):
        self.layers.append(("band", np.asarray(x, float), np.vstack([lo, hi]).astype(float), {"color": color}))
        return self

    def _extent(self):
        xs, ys = [], []
        for kind, x, y, _ in self.layers:
            xs.append(x[np.isfinite(x)])
            ys.append(y[np.isfinite(y)].ravel())
            if kind == "bars":
                ys.append(np.zeros(1))
        x = np.concatenate(xs) if xs else np.zeros(1)
        y = np.concatenate(ys) if ys else np.zeros(1)
        if self.logx:
            x = np.log10(x[x > 0])
        x0, x1 = float(x.min()), float(x.max())
        y0, y1 = float(y.min()), float(y.max())
        if x1 == x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 == y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        pad = 0.05 * (y1 - y0)
        return x0, x1, y0 - pad, y1 + pad

    def render(self, ox, oy, w, h):
        x0, x1, y0, y1 = self._extent()
        ml, mb, mt, mr = 55, 35, 22, 10
        pw, ph = w - ml - mr, h - mt - mb

        def sx(v):
            v = np.log10(v) if self.logx else v
            return ox + ml + (v - x0) / (x1 - x0) * pw

        def sy(v):
            return oy + mt + (y1 - v) / (y1 - y0) * ph

        out = [f'<rect x="{ox + ml}" y="{oy + mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
        if self.title:
            out.append(f'<text x="{ox + ml + pw / 2}" y="{oy + 14}" text-anchor="middle" {FONT}>{escape(self.title)}</text>')
        if self.xlabel:
            out.append(f'<text x="{ox + ml + pw / 2}" y="{oy + h - 4}" text-anchor="middle" {FONT}>{escape(self.xlabel)}</text>')
        if self.ylabel:
            cy = oy + mt + ph / 2
            out.append(
                f'<text x="{ox + 12}" y="{cy}" text-anchor="middle" {FONT} transform="rotate(-90 {ox + 12} {cy})">{escape(self.ylabel)}</text>'
            )
        for frac in (0.0, 0.5, 1.0):
            xv = x0 + frac * (x1 - x0)
            lab = 10 ** xv if self.logx else xv
            out.append(f'<text x="{ox + ml + frac * pw}" y="{oy + mt + ph + 14}" text-anchor="middle" {FONT}>{_fmt(lab)}</text>')
            yv = y0 + frac * (y1 - y0)
            out.append(f'<text x="{ox + ml - 4}" y="{sy(yv) + 4}" text-anchor="end" {FONT}>{_fmt(yv)}</text>')
        for kind, x, y, style in self.layers:
            color = style["color"]
            if kind == "line":
                ok = np.isfinite(x) & np.isfinite(y)
                pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(x[ok], y[ok]))
                dash = f' stroke-dasharray="{style["dash"]}"' if style.get("dash") else ""
                out.append(f'<polyline class="trace" points="{pts}" fill="none" stroke="{color}"{dash}/>')
            elif kind == "points":
                for a, b in zip(x, y):
                    if np.isfinite(a) and np.isfinite(b):
                        out.append(f'<circle class="point" cx="{_fmt(sx(a))}" cy="{_fmt(sy(b))}" r="2" fill="{color}"/>')
            elif kind == "bars":
                for a, b, hgt in zip(x[:-1], x[1:], y):
                    top_y = sy(hgt)
                    out.append(
                        f'<rect class="bar" x="{_fmt(sx(a))}" y="{_fmt(top_y)}" width="{_fmt(sx(b) - sx(a))}" '
                        f'height="{_fmt(sy(0.0) - top_y)}" fill="{color}" stroke="white"/>'
                    )
            elif kind == "band":
                lo, hi = y
                ok = np.isfinite(x) & np.isfinite(lo) & np.isfinite(hi)
                upper = [f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(x[ok], hi[ok])]
                lower = [f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(x[ok][::-1], lo[ok][::-1])]
                out.append(f'<polygon class="band" points="{" ".join(upper + lower)}" fill="{color}" stroke="none"/>')
        return out


def figure(panels, ncols=1, panel_width=360, panel_height=280):
    nrows = (len(panels) + ncols - 1) // ncols
    body = []
    for k, panel in enumerate(panels):
        r, c = divmod(k, ncols)
        body.append(f'<g class="panel">')
        body.extend(panel.render(c * panel_width, r * panel_height, panel_width, panel_height))
        body.append("</g>")
    return _doc(ncols * panel_width, nrows * panel_height, body)
