"""Tiny dependency-free SVG line chart writer."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


@dataclass
class Series:
    label: str
    xs: Sequence[float]
    ys: Sequence[float]
    markers: bool = False
    line: bool = True
    dashed: bool = False
    color: str | None = None


@dataclass
class LineChart:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    y_range: tuple[float, float] | None = None
    width: int = 640
    height: int = 420
    series: list[Series] = field(default_factory=list)

    def add(self, s: Series) -> "LineChart":
        self.series.append(s)
        return self

    def render(self) -> str:
        left, right, top, bottom = 60, 150, 40, 50
        pw, ph = self.width - left - right, self.height - top - bottom
        xs = [x for s in self.series for x in s.xs] or [0.0, 1.0]
        ys = [y for s in self.series for y in s.ys] or [0.0, 1.0]
        x0, x1 = min(xs), max(xs)
        y0, y1 = self.y_range if self.y_range else (min(ys), max(ys))
        x1 = x1 if x1 > x0 else x0 + 1
        y1 = y1 if y1 > y0 else y0 + 1

        def px(x):
            return left + (x - x0) / (x1 - x0) * pw

        def py(y):
            return top + ph - (y - y0) / (y1 - y0) * ph

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'font-family="sans-serif" font-size="11">',
            f'<rect width="{self.width}" height="{self.height}" fill="white"/>',
            f'<text x="{left + pw / 2:.1f}" y="20" text-anchor="middle" font-size="13">{escape(self.title)}</text>',
            f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
            f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        ]
        for i in range(6):
            yv = y0 + (y1 - y0) * i / 5
            xv = x0 + (x1 - x0) * i / 5
            out.append(f'<text x="{left - 6}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:.2f}</text>')
            out.append(f'<line x1="{left}" y1="{py(yv):.1f}" x2="{left + pw}" y2="{py(yv):.1f}" '
                       f'stroke="#ddd"/>')
            out.append(f'<text x="{px(xv):.1f}" y="{top + ph + 16}" text-anchor="middle">{xv:g}</text>')
        out.append(f'<text x="{left + pw / 2:.1f}" y="{self.height - 10}" text-anchor="middle">'
                   f'{escape(self.xlabel)}</text>')
        out.append(f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {top + ph / 2:.1f})">{escape(self.ylabel)}</text>')

        for i, s in enumerate(self.series):
            color = s.color or PALETTE[i % len(PALETTE)]
            pts = [(px(x), py(y)) for x, y in zip(s.xs, s.ys)]
            if s.line and pts:
                dash = ' stroke-dasharray="5,3"' if s.dashed else ""
                path = " ".join(f"{a:.1f},{b:.1f}" for a, b in pts)
                out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
            if s.markers:
                out.extend(f'<circle cx="{a:.1f}" cy="{b:.1f}" r="2.5" fill="{color}"/>' for a, b in pts)
            ly = top + 14 * i + 8
            out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" '
                       f'stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{left + pw + 34}" y="{ly + 4}">{escape(s.label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"
