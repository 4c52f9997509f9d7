"""Minimal SVG charts: scatter/line plots, QQ plots and heatmaps."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np
from scipy import stats

W, H = 480, 360
LEFT, RIGHT, TOP, BOTTOM = 60, 20, 30, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")


def _fmt(v: float) -> str:
    return f"{v:.3g}"


class _Axes:
    def __init__(self, xs, ys, logx=False, logy=False):
        self.logx, self.logy = logx, logy
        tx = self._tx(np.asarray(xs, dtype=float), logx)
        ty = self._tx(np.asarray(ys, dtype=float), logy)
        self.x0, self.x1 = self._pad(np.nanmin(tx), np.nanmax(tx))
        self.y0, self.y1 = self._pad(np.nanmin(ty), np.nanmax(ty))

    @staticmethod
    def _tx(v, log):
        if log:
            v = np.where(v > 0, v, np.nan)
            return np.log10(v)
        return v

    @staticmethod
    def _pad(a, b):
        if not np.isfinite(a) or not np.isfinite(b):
            return 0.0, 1.0
        if a == b:
            return a - 0.5, b + 0.5
        m = 0.05 * (b - a)
        return a - m, b + m

    def px(self, x):
        t = self._tx(np.asarray(x, dtype=float), self.logx)
        return LEFT + (t - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)

    def py(self, y):
        t = self._tx(np.asarray(y, dtype=float), self.logy)
        return H - BOTTOM - (t - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)

    def ticks(self):
        out = []
        for k in range(5):
            fx = self.x0 + (self.x1 - self.x0) * k / 4
            fy = self.y0 + (self.y1 - self.y0) * k / 4
            vx = 10 ** fx if self.logx else fx
            vy = 10 ** fy if self.logy else fy
            X = LEFT + k / 4 * (W - LEFT - RIGHT)
            Y = H - BOTTOM - k / 4 * (H - TOP - BOTTOM)
            out.append(f'<text x="{X:.1f}" y="{H - BOTTOM + 16}" font-size="10" '
                       f'text-anchor="middle">{_fmt(vx)}</text>')
            out.append(f'<text x="{LEFT - 6}" y="{Y + 3:.1f}" font-size="10" '
                       f'text-anchor="end">{_fmt(vy)}</text>')
        return out


def _frame(title, xlabel, ylabel, body):
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
             f'viewBox="0 0 {W} {H}">',
             '<rect width="100%" height="100%" fill="white"/>',
             f'<rect x="{LEFT}" y="{TOP}" width="{W - LEFT - RIGHT}" '
             f'height="{H - TOP - BOTTOM}" fill="none" stroke="black"/>',
             f'<text x="{W / 2}" y="18" font-size="13" text-anchor="middle">{escape(title)}</text>',
             f'<text x="{W / 2}" y="{H - 10}" font-size="11" text-anchor="middle">{escape(xlabel)}</text>',
             f'<text x="14" y="{H / 2}" font-size="11" text-anchor="middle" '
             f'transform="rotate(-90 14 {H / 2})">{escape(ylabel)}</text>']
    parts.extend(body)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def line_plot(series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
              logx: bool = False, logy: bool = False, errors: dict | None = None,
              connect: bool = True) -> str:
    """series maps a label to (xs, ys); errors optionally maps a label to y half-widths."""
    allx = np.concatenate([np.asarray(v[0], dtype=float) for v in series.values()])
    ally = np.concatenate([np.asarray(v[1], dtype=float) for v in series.values()])
    ax = _Axes(allx, ally, logx, logy)
    body = ax.ticks()
    for i, (label, (xs, ys)) in enumerate(series.items()):
        c = COLORS[i % len(COLORS)]
        X, Y = ax.px(xs), ax.py(ys)
        ok = np.isfinite(X) & np.isfinite(Y)
        if connect and ok.sum() > 1:
            pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(X[ok], Y[ok]))
            body.append(f'<polyline points="{pts}" fill="none" stroke="{c}"/>')
        for a, b in zip(X[ok], Y[ok]):
            body.append(f'<circle cx="{a:.1f}" cy="{b:.1f}" r="2.5" fill="{c}"/>')
        if errors and label in errors:
            for xv, yv, e in zip(xs, ys, errors[label]):
                lo, hi = ax.py(yv - e), ax.py(yv + e)
                xp = ax.px(xv)
                if np.all(np.isfinite([lo, hi, xp])):
                    body.append(f'<line x1="{xp:.1f}" x2="{xp:.1f}" y1="{lo:.1f}" '
                                f'y2="{hi:.1f}" stroke="{c}"/>')
        body.append(f'<text x="{W - RIGHT - 6}" y="{TOP + 14 + 14 * i}" font-size="10" '
                    f'text-anchor="end" fill="{c}">{escape(str(label))}</text>')
    return _frame(title, xlabel, ylabel, body)


def qq_plot(values, title: str = "normal QQ") -> str:
    """Standardised sample quantiles against N(0, 1) quantiles."""
    z = np.sort(np.asarray(values, dtype=float))
    sd = z.std(ddof=1)
    z = (z - z.mean()) / (sd if sd > 0 else 1.0)
    n = z.size
    q = stats.norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    lim = float(max(np.max(np.abs(q)), np.max(np.abs(z))))
    return line_plot({"sample": (q, z), "y = x": (np.array([-lim, lim]), np.array([-lim, lim]))},
                     title, "normal quantile", "sample quantile", connect=False)


def heatmap(values, xs, ys, title: str = "", xlabel: str = "", ylabel: str = "",
            log: bool = True) -> str:
    """Cells coloured by value (log scale by default); NaN cells are left blank."""
    V = np.asarray(values, dtype=float)
    T = np.log10(np.where(V > 0, V, np.nan)) if log else V
    lo, hi = np.nanmin(T), np.nanmax(T)
    span = hi - lo if hi > lo else 1.0
    ny, nx = V.shape
    cw = (W - LEFT - RIGHT) / nx
    ch = (H - TOP - BOTTOM) / ny
    body = []
    for i in range(ny):
        for j in range(nx):
            if not math.isfinite(T[i, j]):
                continue
            t = (T[i, j] - lo) / span
            r, b = int(255 * t), int(255 * (1 - t))
            body.append(f'<rect x="{LEFT + j * cw:.1f}" y="{H - BOTTOM - (i + 1) * ch:.1f}" '
                        f'width="{cw:.1f}" height="{ch:.1f}" fill="rgb({r},64,{b})"/>')
    for j in range(0, nx, max(1, nx // 5)):
        body.append(f'<text x="{LEFT + (j + 0.5) * cw:.1f}" y="{H - BOTTOM + 16}" font-size="10" '
                    f'text-anchor="middle">{_fmt(xs[j])}</text>')
    for i in range(0, ny, max(1, ny // 5)):
        body.append(f'<text x="{LEFT - 6}" y="{H - BOTTOM - (i + 0.5) * ch + 3:.1f}" '
                    f'font-size="10" text-anchor="end">{_fmt(ys[i])}</text>')
    scale = f"colour: log10 range [{_fmt(lo)}, {_fmt(hi)}]" if log else \
        f"colour range [{_fmt(lo)}, {_fmt(hi)}]"
    body.append(f'<text x="{W - RIGHT}" y="{TOP - 4}" font-size="9" text-anchor="end">{scale}</text>')
    return _frame(title, xlabel, ylabel, body)
