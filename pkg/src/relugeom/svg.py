"""Minimal deterministic SVG writer for planar polygons and points."""
from __future__ import annotations

import colorsys
from xml.sax.saxutils import escape

import numpy as np


def categorical_color(i: int) -> str:
    """Well-spread pastel colour for index ``i`` (golden-ratio hue walk)."""
    hue = (i * 0.6180339887498949) % 1.0
    r, g, b = colorsys.hls_to_rgb(hue, 0.72, 0.55)
    return "#{:02x}{:02x}{:02x}".format(round(255 * r), round(255 * g), round(255 * b))


class SvgCanvas:
    """Maps a box ``[[xmin, xmax], [ymin, ymax]]`` to a square canvas, y up."""

    def __init__(self, box, size: int = 512, margin: int = 8):
        box = np.asarray(box, dtype=np.float64)
        self.lo = box[:, 0]
        span = box[:, 1] - box[:, 0]
        self.scale = (size - 2 * margin) / float(max(span.max(), 1e-300))
        self.size = size
        self.margin = margin
        self.height = int(round(span[1] * self.scale)) + 2 * margin
        self.width = int(round(span[0] * self.scale)) + 2 * margin
        self._items: list[str] = []

    def _xy(self, p) -> tuple[float, float]:
        x = self.margin + (p[0] - self.lo[0]) * self.scale
        y = self.height - self.margin - (p[1] - self.lo[1]) * self.scale
        return x, y

    @staticmethod
    def _title(title):
        return f"<title>{escape(title)}</title>" if title else ""

    def polygon(self, points, fill="none", stroke="#000000", title=None, stroke_width=0.5):
        pts = np.asarray(points, dtype=np.float64)
        if len(pts) < 3:
            return
        coords = " ".join("{:.3f},{:.3f}".format(*self._xy(p)) for p in pts)
        self._items.append(
            f'<polygon points="{coords}" fill="{fill}" stroke="{stroke}" '
            f'stroke-width="{stroke_width}">{self._title(title)}</polygon>')

    def polyline(self, points, stroke="#000000", stroke_width=1.0):
        coords = " ".join("{:.3f},{:.3f}".format(*self._xy(p)) for p in np.asarray(points))
        self._items.append(
            f'<polyline points="{coords}" fill="none" stroke="{stroke}" '
            f'stroke-width="{stroke_width}"/>')

    def circle(self, center, r=2.0, fill="#000000", title=None):
        x, y = self._xy(center)
        self._items.append(
            f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{r}" fill="{fill}">{self._title(title)}</circle>')

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
                f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">')
        return "\n".join([head, '<rect width="100%" height="100%" fill="#ffffff"/>',
                          *self._items, "</svg>"]) + "\n"
