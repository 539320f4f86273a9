"""A very small static SVG chart writer (axes, lines, points, error bars, boxes)."""

from __future__ import annotations

import math
from html import escape

PALETTE = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d"]
DASHES = ["", "6,3", "2,2", "8,3,2,3"]


def nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi == lo:
        return [lo]
    raw = (hi - lo) / max(count, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    ticks, t = [], start
    while t <= hi + step * 1e-9:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _tick_text(v: float) -> str:
    return f"{v:.6g}"


class Panel:
    """One set of axes inside a :class:`Figure`."""

    def __init__(self, fig, x0, y0, w, h, xlim, ylim, title=""):
        self.fig, self.x0, self.y0, self.w, self.h = fig, x0, y0, w, h
        self.xlim = self._pad(xlim)
        self.ylim = self._pad(ylim)
        self.title = title

    @staticmethod
    def _pad(lim):
        lo, hi = lim
        if not (math.isfinite(lo) and math.isfinite(hi)):
            return 0.0, 1.0
        if hi == lo:
            d = abs(lo) * 0.1 or 1.0
            return lo - d, hi + d
        d = (hi - lo) * 0.05
        return lo - d, hi + d

    def px(self, x: float) -> float:
        lo, hi = self.xlim
        return self.x0 + (x - lo) / (hi - lo) * self.w

    def py(self, y: float) -> float:
        lo, hi = self.ylim
        return self.y0 + self.h - (y - lo) / (hi - lo) * self.h

    def axes(self, xlabel="", ylabel="", xticks=None, xticklabels=None):
        f = self.fig
        f.add(f'<rect x="{self.x0:.2f}" y="{self.y0:.2f}" width="{self.w:.2f}" '
              f'height="{self.h:.2f}" fill="none" stroke="#333"/>')
        if self.title:
            f.text(self.x0 + self.w / 2, self.y0 - 8, self.title, anchor="middle", size=12)
        ticks = xticks if xticks is not None else nice_ticks(*self.xlim)
        labels = xticklabels or [_tick_text(t) for t in ticks]
        for t, lab in zip(ticks, labels):
            x = self.px(t)
            f.add(f'<line x1="{x:.2f}" y1="{self.y0 + self.h:.2f}" x2="{x:.2f}" '
                  f'y2="{self.y0 + self.h + 4:.2f}" stroke="#333"/>')
            f.text(x, self.y0 + self.h + 16, lab, anchor="middle", size=10)
        for t in nice_ticks(*self.ylim):
            y = self.py(t)
            f.add(f'<line x1="{self.x0 - 4:.2f}" y1="{y:.2f}" x2="{self.x0:.2f}" y2="{y:.2f}" '
                  f'stroke="#333"/>')
            f.text(self.x0 - 6, y + 3, _tick_text(t), anchor="end", size=10)
        if xlabel:
            f.text(self.x0 + self.w / 2, self.y0 + self.h + 34, xlabel, anchor="middle", size=11)
        if ylabel:
            cx, cy = self.x0 - 48, self.y0 + self.h / 2
            f.add(f'<text x="{cx:.2f}" y="{cy:.2f}" font-size="11" text-anchor="middle" '
                  f'transform="rotate(-90 {cx:.2f} {cy:.2f})">{escape(ylabel)}</text>')

    def polyline(self, xs, ys, color, dash="", width=1.5, opacity=1.0):
        pts = " ".join(f"{self.px(x):.2f},{self.py(y):.2f}" for x, y in zip(xs, ys))
        style = f' stroke-dasharray="{dash}"' if dash else ""
        self.fig.add(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="{width}" stroke-opacity="{opacity}"{style}/>')

    def point(self, x, y, color, r=2.5):
        self.fig.add(f'<circle cx="{self.px(x):.2f}" cy="{self.py(y):.2f}" r="{r}" fill="{color}"/>')

    def errorbar(self, x, lo, hi, color, cap=4):
        X, L, H = self.px(x), self.py(lo), self.py(hi)
        self.fig.add(f'<line x1="{X:.2f}" y1="{L:.2f}" x2="{X:.2f}" y2="{H:.2f}" stroke="{color}"/>')
        for yy in (L, H):
            self.fig.add(f'<line x1="{X - cap:.2f}" y1="{yy:.2f}" x2="{X + cap:.2f}" '
                         f'y2="{yy:.2f}" stroke="{color}"/>')

    def box(self, x, stats, color, half=0.3):
        q1, med, q3, wlo, whi = stats
        L, R, X = self.px(x - half), self.px(x + half), self.px(x)
        f = self.fig
        f.add(f'<rect x="{L:.2f}" y="{self.py(q3):.2f}" width="{R - L:.2f}" '
              f'height="{self.py(q1) - self.py(q3):.2f}" fill="{color}" fill-opacity="0.3" '
              f'stroke="{color}"/>')
        f.add(f'<line x1="{L:.2f}" y1="{self.py(med):.2f}" x2="{R:.2f}" y2="{self.py(med):.2f}" '
              f'stroke="{color}" stroke-width="2"/>')
        for a, b in ((wlo, q1), (q3, whi)):
            f.add(f'<line x1="{X:.2f}" y1="{self.py(a):.2f}" x2="{X:.2f}" y2="{self.py(b):.2f}" '
                  f'stroke="{color}"/>')


class Figure:
    def __init__(self, width=640, height=420, title=""):
        self.width, self.height, self.title = width, height, title
        self.parts: list[str] = []

    def add(self, element: str) -> None:
        self.parts.append(element)

    def text(self, x, y, s, anchor="start", size=11):
        self.add(f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}" '
                 f'text-anchor="{anchor}">{escape(str(s))}</text>')

    def panels(self, n: int, xlims, ylim, titles, legend_width=150):
        left, top, bottom = 70, 50 if self.title else 30, 50
        avail = self.width - left - legend_width - 10
        gap = 40
        w = (avail - gap * (n - 1)) / max(n, 1)
        h = self.height - top - bottom
        return [Panel(self, left + i * (w + gap), top, w, h, xlims[i], ylim, titles[i])
                for i in range(n)]

    def legend(self, entries):
        x = self.width - 145
        y = 40 if self.title else 25
        for i, (label, color, dash) in enumerate(entries):
            yy = y + 18 * i
            style = f' stroke-dasharray="{dash}"' if dash else ""
            self.add(f'<line x1="{x:.2f}" y1="{yy:.2f}" x2="{x + 20:.2f}" y2="{yy:.2f}" '
                     f'stroke="{color}" stroke-width="2"{style}/>')
            self.text(x + 26, yy + 4, label, size=11)

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
                f'height="{self.height}" viewBox="0 0 {self.width} {self.height}" '
                'font-family="sans-serif">')
        body = ['<rect width="100%" height="100%" fill="white"/>']
        if self.title:
            body.append(f'<text x="{self.width / 2:.2f}" y="20" font-size="14" '
                        f'text-anchor="middle">{escape(self.title)}</text>')
        return "\n".join([head, *body, *self.parts, "</svg>"]) + "\n"
