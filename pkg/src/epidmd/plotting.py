"""Deterministic hand-built SVG figures (no timestamps, fixed number formatting)."""

from __future__ import annotations

import numpy as np

from .dmd import DmdModel
from .snapshot import SnapshotSeries

WIDTH, HEIGHT, PAD = 640, 400, 48
PALETTE = (
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e",
    "#e6ab02", "#a6761d", "#666666", "#1f78b4", "#b2df8a",
)


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


class _Canvas:
    def __init__(self, xlim, ylim, title: str, width=WIDTH, height=HEIGHT):
        self.width, self.height = width, height
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 == self.x0:
            self.x0, self.x1 = self.x0 - 1, self.x1 + 1
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 1, self.y1 + 1
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">',
            f'<rect class="background" x="0" y="0" width="{width}" height="{height}" fill="white"/>',
            f'<text class="title" x="{width / 2:.0f}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{_escape(title)}</text>',
        ]

    def px(self, x: float) -> float:
        return PAD + (x - self.x0) / (self.x1 - self.x0) * (self.width - 2 * PAD)

    def py(self, y: float) -> float:
        return self.height - PAD - (y - self.y0) / (self.y1 - self.y0) * (self.height - 2 * PAD)

    def frame(self, xlabel: str, ylabel: str) -> None:
        l, r = PAD, self.width - PAD
        t, b = PAD, self.height - PAD
        self.parts.append(
            f'<rect class="frame" x="{l}" y="{t}" width="{r - l}" height="{b - t}" '
            f'fill="none" stroke="black" stroke-width="1"/>'
        )
        for tick in np.linspace(self.x0, self.x1, 5):
            x = self.px(tick)
            self.parts.append(
                f'<text class="tick" x="{_f(x)}" y="{b + 14}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="10">{_f(tick)}</text>'
            )
        for tick in np.linspace(self.y0, self.y1, 5):
            y = self.py(tick)
            self.parts.append(
                f'<text class="tick" x="{l - 4}" y="{_f(y + 3)}" text-anchor="end" '
                f'font-family="sans-serif" font-size="10">{_f(tick)}</text>'
            )
        self.parts.append(
            f'<text class="xlabel" x="{self.width / 2:.0f}" y="{self.height - 8}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{_escape(xlabel)}</text>'
        )
        self.parts.append(
            f'<text class="ylabel" x="12" y="{self.height / 2:.0f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12" transform="rotate(-90 12 {self.height / 2:.0f})">'
            f"{_escape(ylabel)}</text>"
        )

    def polyline(self, xs, ys, color: str, cls: str, label: str, dashed: bool = False) -> None:
        pts = " ".join(f"{_f(self.px(x))},{_f(self.py(y))}" for x, y in zip(xs, ys))
        dash = ' stroke-dasharray="6,3"' if dashed else ""
        self.parts.append(
            f'<polyline class="{cls}" data-label="{_escape(label)}" points="{pts}" fill="none" '
            f'stroke="{color}" stroke-width="1.5"{dash}/>'
        )

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _limits(arrays) -> tuple[float, float]:
    lo = min(float(np.min(a)) for a in arrays)
    hi = max(float(np.max(a)) for a in arrays)
    return lo, hi


def plot_series(actual: SnapshotSeries, predicted: SnapshotSeries | None = None, title: str = "") -> str:
    """One solid polyline per node; forecasts dashed with a shaded error band to the actuals."""
    arrays = [actual.values] + ([predicted.values] if predicted is not None else [])
    t_actual = actual.t0 + np.arange(actual.T)
    t_lo, t_hi = float(t_actual[0]), float(t_actual[-1])
    if predicted is not None:
        t_lo = min(t_lo, float(predicted.t0))
        t_hi = max(t_hi, float(predicted.t0 + predicted.T - 1))
    canvas = _Canvas((t_lo * actual.dt, t_hi * actual.dt), _limits(arrays), title or "snapshot series")
    canvas.frame("time", "count")
    for j, node in enumerate(actual.node_ids):
        color = PALETTE[j % len(PALETTE)]
        if predicted is not None and node in predicted.node_ids:
            k = predicted.node_ids.index(node)
            tp = predicted.t0 + np.arange(predicted.T)
            common, ia, ip = np.intersect1d(t_actual, tp, return_indices=True)
            if common.size:
                upper = [(canvas.px(t * actual.dt), canvas.py(v)) for t, v in zip(common, actual.values[ia, j])]
                lower = [(canvas.px(t * actual.dt), canvas.py(v)) for t, v in zip(common, predicted.values[ip, k])]
                pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in upper + lower[::-1])
                canvas.parts.append(
                    f'<polygon class="error-band" points="{pts}" fill="#d62728" fill-opacity="0.2" stroke="none"/>'
                )
        canvas.polyline(t_actual * actual.dt, actual.values[:, j], color, "series actual", node)
        if predicted is not None and node in predicted.node_ids:
            k = predicted.node_ids.index(node)
            tp = predicted.t0 + np.arange(predicted.T)
            canvas.polyline(tp * predicted.dt, predicted.values[:, k], color, "series predicted", node, dashed=True)
    return canvas.render()


def plot_spectrum(model: DmdModel, title: str = "") -> str:
    """Eigenvalues in the complex plane against the unit circle."""
    lam = np.asarray(model.eigenvalues, dtype=complex)
    extent = max(1.1, float(np.abs(lam).max(initial=0.0)) * 1.1)
    canvas = _Canvas((-extent, extent), (-extent, extent), title or "DMD eigenvalues", width=HEIGHT, height=HEIGHT)
    canvas.frame("Re(lambda)", "Im(lambda)")
    cx, cy = canvas.px(0.0), canvas.py(0.0)
    radius = canvas.px(1.0) - cx
    canvas.parts.append(
        f'<circle class="unit-circle" cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(radius)}" '
        f'fill="none" stroke="#888888" stroke-dasharray="4,3"/>'
    )
    amp = np.abs(model.amplitudes)
    scale = amp.max() if amp.size and amp.max() > 0 else 1.0
    for i, z in enumerate(lam):
        r = 3.0 + 4.0 * float(amp[i] / scale)
        canvas.parts.append(
            f'<circle class="eig" data-index="{i}" data-re="{z.real:.6f}" data-im="{z.imag:.6f}" '
            f'cx="{_f(canvas.px(z.real))}" cy="{_f(canvas.py(z.imag))}" r="{_f(r)}" '
            f'fill="{PALETTE[i % len(PALETTE)]}" stroke="black" stroke-width="0.5"/>'
        )
    return canvas.render()


def plot_modes(model: DmdModel, max_modes: int = 6, title: str = "") -> str:
    """Real part of each leading mode across the nodes."""
    k = min(max_modes, model.rank)
    phi = np.asarray(model.modes[:, :k]).real
    nodes = np.arange(model.n_nodes)
    canvas = _Canvas((0.0, float(max(model.n_nodes - 1, 1))), _limits([phi, np.zeros(1)]), title or "DMD modes")
    canvas.frame("node index", "Re(mode)")
    for i in range(k):
        lam = model.eigenvalues[i]
        label = f"mode {i}: lambda={lam.real:.4f}{lam.imag:+.4f}i"
        canvas.polyline(nodes, phi[:, i], PALETTE[i % len(PALETTE)], "mode", label)
    return canvas.render()


def save_svg(text: str, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
