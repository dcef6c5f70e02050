"""Minimal SVG scatter plots of 2-D embeddings colored by ordinal rank."""

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

# sequential ramp (viridis stops), low rank -> dark, high rank -> light
_RAMP = ["#440154", "#482878", "#3e4989", "#31688e", "#26828e",
         "#1f9e89", "#35b779", "#6ece58", "#b5de2b", "#fde725"]


def _hex_to_rgb(c):
    return tuple(int(c[i:i + 2], 16) for i in (1, 3, 5))


def palette(k):
    """``k`` colors sampled evenly along the ramp, in rank order."""
    stops = np.array([_hex_to_rgb(c) for c in _RAMP], dtype=np.float64)
    pos = np.linspace(0, len(_RAMP) - 1, k) if k > 1 else np.zeros(1)
    out = []
    for p in pos:
        lo = int(np.floor(p))
        hi = min(lo + 1, len(_RAMP) - 1)
        rgb = stops[lo] + (p - lo) * (stops[hi] - stops[lo])
        out.append("#%02x%02x%02x" % tuple(int(round(v)) for v in rgb))
    return out


@dataclass
class SvgScatter:
    points: np.ndarray
    ranks: np.ndarray
    k_states: int
    labels: tuple = None
    width: int = 640
    height: int = 520
    margin: int = 50
    legend_width: int = 110
    radius: float = 2.5
    title: str = ""

    def _ranges(self):
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        span = np.where(hi - lo > 0, hi - lo, 1.0)
        return lo, lo + span

    def render(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"scatter needs 2-D points, got shape {pts.shape}")
        colors = palette(self.k_states)
        (x0, y0), (x1, y1) = self._ranges()
        plot_w = self.width - 2 * self.margin - self.legend_width
        plot_h = self.height - 2 * self.margin
        px = self.margin + (pts[:, 0] - x0) / (x1 - x0) * plot_w
        py = self.margin + plot_h - (pts[:, 1] - y0) / (y1 - y0) * plot_h

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
               f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">',
               f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="white"/>']
        if self.title:
            out.append(f'<text x="{self.margin}" y="{self.margin / 2:.1f}" '
                       f'font-family="sans-serif" font-size="14">{escape(self.title)}</text>')
        out.append(f'<rect x="{self.margin}" y="{self.margin}" width="{plot_w}" '
                   f'height="{plot_h}" fill="none" stroke="#888"/>')
        for label, x, y, anchor in ((f"{x0:.3g}", self.margin, self.margin + plot_h + 16, "start"),
                                    (f"{x1:.3g}", self.margin + plot_w, self.margin + plot_h + 16, "end")):
            out.append(f'<text x="{x}" y="{y}" font-family="sans-serif" font-size="10" '
                       f'text-anchor="{anchor}">{label}</text>')
        out.append(f'<text x="{self.margin - 4}" y="{self.margin + plot_h}" font-family="sans-serif" '
                   f'font-size="10" text-anchor="end">{y0:.3g}</text>')
        out.append(f'<text x="{self.margin - 4}" y="{self.margin + 8}" font-family="sans-serif" '
                   f'font-size="10" text-anchor="end">{y1:.3g}</text>')

        out.append('<g id="points">')
        for x, y, r in zip(px, py, np.asarray(self.ranks, dtype=np.int64)):
            out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{self.radius}" '
                       f'fill="{colors[r]}" fill-opacity="0.8" data-rank="{r}"/>')
        out.append("</g>")

        present = sorted(set(int(r) for r in self.ranks))
        lx = self.width - self.margin - self.legend_width + 20
        out.append('<g id="legend">')
        for j, r in enumerate(present):
            ly = self.margin + 18 * j
            name = self.labels[r] if self.labels is not None else r
            out.append(f'<rect x="{lx}" y="{ly}" width="12" height="12" fill="{colors[r]}"/>')
            out.append(f'<text x="{lx + 18}" y="{ly + 10}" font-family="sans-serif" '
                       f'font-size="11">{escape(str(name))}</text>')
        out.append("</g>")
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.render())
