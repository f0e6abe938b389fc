"""Deterministic SVG scatter of ensemble candidates (accuracy vs. fairness gap)."""

from __future__ import annotations

from html import escape
from typing import Mapping, Sequence

from .ensemble import EnsembleCandidate, ParetoFrontier
from .errors import ValidationError

WIDTH, HEIGHT = 640, 480
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 30, 40, 60
MODEL_COLORS = ("#d62728", "#2ca02c", "#e377c2", "#ff7f0e", "#9467bd", "#8c564b")


def _num(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _domain(values: Sequence[float]) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    if hi - lo < 1e-9:
        lo, hi = lo - 0.05, hi + 0.05
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    return [lo + (hi - lo) * k / n for k in range(n + 1)]


def render_scatter(candidates: Sequence[EnsembleCandidate], frontier: ParetoFrontier | Sequence[EnsembleCandidate],
                   models: Mapping[str, EnsembleCandidate] | None = None, hlines: Sequence[float] = (),
                   vlines: Sequence[float] = (), gap_label: str = "gap", title: str | None = None) -> str:
    """SVG document: candidates as dots, frontier points as larger markers, individual models as labelled crosses.

    Candidates with an undefined gap are not drawn. Identical inputs always
    give byte-identical output.
    """
    shown = [c for c in candidates if c.defined]
    if not shown:
        raise ValidationError("nothing to plot: no candidate with a defined gap")
    models = dict(models or {})
    frontier = [p for p in frontier if p.defined]
    xs = [c.accuracy for c in shown] + list(vlines)
    ys = [c.gap for c in shown] + list(hlines)
    x0, x1 = _domain(xs)
    y0, y1 = _domain(ys)
    pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(acc: float) -> float:
        return MARGIN_LEFT + (acc - x0) / (x1 - x0) * pw

    def py(gap: float) -> float:
        return MARGIN_TOP + (1 - (gap - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" data-x-domain="{x0!r} {x1!r}" data-y-domain="{y0!r} {y1!r}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text class="title" x="{WIDTH / 2:.2f}" y="22" text-anchor="middle" '
                   f'font-size="14">{escape(title)}</text>')
    bottom, right = MARGIN_TOP + ph, MARGIN_LEFT + pw
    out.append(f'<line class="axis" x1="{MARGIN_LEFT}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>')
    out.append(f'<line class="axis" x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{bottom}" stroke="black"/>')
    for t in _ticks(x0, x1):
        out.append(f'<text class="tick" x="{_num(px(t))}" y="{bottom + 16}" text-anchor="middle" '
                   f'font-size="10">{t:.3f}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<text class="tick" x="{MARGIN_LEFT - 6}" y="{_num(py(t) + 3)}" text-anchor="end" '
                   f'font-size="10">{t:.3f}</text>')
    out.append(f'<text class="axis-label" x="{MARGIN_LEFT + pw / 2:.2f}" y="{HEIGHT - 18}" '
               f'text-anchor="middle" font-size="12">accuracy</text>')
    out.append(f'<text class="axis-label" x="18" y="{MARGIN_TOP + ph / 2:.2f}" text-anchor="middle" '
               f'font-size="12" transform="rotate(-90 18 {MARGIN_TOP + ph / 2:.2f})">{escape(gap_label)}</text>')
    for h in hlines:
        out.append(f'<line class="ref" x1="{MARGIN_LEFT}" y1="{_num(py(h))}" x2="{right}" y2="{_num(py(h))}" '
                   f'stroke="gray" stroke-dasharray="4 3"/>')
    for v in vlines:
        out.append(f'<line class="ref" x1="{_num(px(v))}" y1="{MARGIN_TOP}" x2="{_num(px(v))}" y2="{bottom}" '
                   f'stroke="gray" stroke-dasharray="4 3"/>')
    for c in shown:
        out.append(f'<circle class="candidate" cx="{_num(px(c.accuracy))}" cy="{_num(py(c.gap))}" r="2" '
                   f'fill="#9ecae1"/>')
    for p in frontier:
        out.append(f'<circle class="frontier" cx="{_num(px(p.accuracy))}" cy="{_num(py(p.gap))}" r="3.5" '
                   f'fill="#7f7f7f" data-accuracy="{p.accuracy!r}" data-gap="{p.gap!r}"/>')
    for k, (name, c) in enumerate(models.items()):
        if not c.defined:
            continue
        x, y = px(c.accuracy), py(c.gap)
        color = MODEL_COLORS[k % len(MODEL_COLORS)]
        out.append(f'<path class="model" d="M{_num(x - 5)} {_num(y - 5)}L{_num(x + 5)} {_num(y + 5)}'
                   f'M{_num(x - 5)} {_num(y + 5)}L{_num(x + 5)} {_num(y - 5)}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text class="model-label" x="{_num(x + 7)}" y="{_num(y - 7)}" font-size="11" '
                   f'fill="{color}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
