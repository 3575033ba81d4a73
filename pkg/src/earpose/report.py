"""Deterministic SVG charts with companion CSV tables.

Three kinds are supported:

``polar``
    One ear: every observation drawn as its locus of candidate orientations
    on a polar plot whose radius reads the off-stalk angle, plus the fused
    estimate.
``pr_curve``
    Precision against recall with the interpolated envelope and AP.
``temporal``
    Mean off-stalk angle per date with a one-standard-deviation band.

Output depends only on the inputs: numbers are printed with fixed
precision, element order is fixed, and nothing time- or host-dependent is
written.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .exceptions import SkippedForPlot
from .fusion import constraint_normal, tan_plane_point
from .geometry import EarAngles

KINDS = ("polar", "pr_curve", "temporal")

POLAR_HEADER = ["item", "frame", "bearing_deg", "theta2_deg", "elevation_deg",
                "cardinal_deg", "offstalk_deg"]
PR_HEADER = ["rank", "recall", "precision", "envelope"]
TEMPORAL_HEADER = ["date", "mean_offstalk_deg", "std_offstalk_deg", "n", "fraction_down"]


@dataclass(frozen=True)
class Style:
    width: int = 480
    height: int = 480
    margin: int = 40
    line_color: str = "#2e8b57"
    mark_color: str = "#d62728"
    axis_color: str = "#555555"
    font_size: int = 12
    line_samples: int = 721


@dataclass(frozen=True)
class Report:
    kind: str
    svg: str
    header: list
    rows: list


def _n(v):
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


class _Svg:
    def __init__(self, width, height, title):
        self.width, self.height = width, height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">',
            f"<title>{escape(title)}</title>",
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        ]

    def line(self, x1, y1, x2, y2, stroke, width=1.0, dash=None):
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(f'<line x1="{_n(x1)}" y1="{_n(y1)}" x2="{_n(x2)}" y2="{_n(y2)}" '
                          f'stroke="{stroke}" stroke-width="{_n(width)}"{extra}/>')

    def polyline(self, pts, stroke, width=1.0, cls=None):
        attr = f' class="{cls}"' if cls else ""
        coords = " ".join(f"{_n(x)},{_n(y)}" for x, y in pts)
        self.parts.append(f'<polyline{attr} points="{coords}" fill="none" stroke="{stroke}" '
                          f'stroke-width="{_n(width)}"/>')

    def polygon(self, pts, fill, opacity=0.3):
        coords = " ".join(f"{_n(x)},{_n(y)}" for x, y in pts)
        self.parts.append(f'<polygon points="{coords}" fill="{fill}" '
                          f'fill-opacity="{_n(opacity)}" stroke="none"/>')

    def circle(self, cx, cy, r, stroke, fill="none", cls=None):
        attr = f' class="{cls}"' if cls else ""
        self.parts.append(f'<circle{attr} cx="{_n(cx)}" cy="{_n(cy)}" r="{_n(r)}" '
                          f'fill="{fill}" stroke="{stroke}"/>')

    def text(self, x, y, s, size, anchor="middle"):
        self.parts.append(f'<text x="{_n(x)}" y="{_n(y)}" font-family="sans-serif" '
                          f'font-size="{size}" text-anchor="{anchor}">{escape(str(s))}</text>')

    def render(self):
        return "\n".join(self.parts + ["</svg>"]) + "\n"


# -- polar -----------------------------------------------------------------

def polar_xy(cardinal, off_stalk, style: Style):
    """Screen position of an upward orientation: north up, radius ~ off-stalk."""
    cx, cy = style.width / 2.0, style.height / 2.0
    r = off_stalk / 90.0 * (min(style.width, style.height) / 2.0 - style.margin)
    c = math.radians(cardinal)
    return cx + r * math.sin(c), cy - r * math.cos(c)


def observation_locus(obs, samples=721):
    """(cardinal, off-stalk) samples of every upward direction consistent
    with one observation.

    The constraint plane meets the horizontal tan-plane in the straight
    line ``a . P = c``. It is parametrised as ``P = c a + t a_perp`` with
    ``t = sqrt(1 + c^2) tan(tau)`` and ``tau`` uniform in (-90, 90), which
    spaces the samples evenly in angle along the great circle.
    """
    n = constraint_normal(obs.bearing, obs.theta2, obs.elevation)
    h = math.hypot(n[0], n[1])
    if h < 1e-9:
        raise SkippedForPlot("observation plane is horizontal")
    a = np.array([n[0], n[1]]) / h
    c = -n[2] / h
    perp = np.array([-a[1], a[0]])
    tau = np.radians(-90.0 + 180.0 * (np.arange(samples) + 0.5) / samples)
    t = math.sqrt(1.0 + c * c) * np.tan(tau)
    p = c * a + t[:, None] * perp
    cardinal = np.degrees(np.arctan2(p[:, 0], p[:, 1]))
    off_stalk = np.degrees(np.arctan(np.hypot(p[:, 0], p[:, 1])))
    return cardinal, off_stalk


def polar_report(observations, estimate: EarAngles | None = None, title="ear",
                 style: Style | None = None) -> Report:
    """Polar plot of one ear's observation loci and its fused estimate.

    An estimate pointing downward (off-stalk > 90) is drawn hollow at its
    mirror image, the upward direction on the same axis.
    """
    style = style or Style()
    observations = list(observations)
    if not observations and estimate is None:
        raise ValueError("polar report needs observations or an estimate")
    svg = _Svg(style.width, style.height, f"orientation: {title}")
    cx, cy = style.width / 2.0, style.height / 2.0
    for ring in (30, 60, 90):
        _, y = polar_xy(0.0, ring, style)
        svg.circle(cx, cy, cy - y, style.axis_color)
        svg.text(cx + 3, y - 3, f"{ring}°", style.font_size - 2, anchor="start")
    for card, label in ((0, "N"), (90, "E"), (180, "S"), (270, "W")):
        x, y = polar_xy(card, 90.0, style)
        svg.line(cx, cy, x, y, style.axis_color, 0.5, dash="2,3")
        lx, ly = polar_xy(card, 90.0 + 10.0 * 90.0 / (cy - style.margin), style)
        svg.text(lx, ly + style.font_size / 3.0, label, style.font_size)

    rows = []
    for o in observations:
        rows.append(["observation", o.frame_index, o.bearing, o.theta2, o.elevation, "", ""])
        try:
            card, psi = observation_locus(o, style.line_samples)
        except SkippedForPlot:
            continue
        pts = [polar_xy(c, p, style) for c, p in zip(card, psi)]
        svg.polyline(pts, style.line_color, 0.75, cls="locus")

    if estimate is not None:
        rows.append(["estimate", "", "", "", "", estimate.cardinal, estimate.off_stalk])
        down = estimate.off_stalk > 90.0
        try:
            e, n = tan_plane_point(estimate)
            x, y = polar_xy(math.degrees(math.atan2(e, n)),
                            math.degrees(math.atan(math.hypot(e, n))), style)
        except SkippedForPlot:
            x, y = polar_xy(estimate.cardinal, 90.0, style)
        svg.circle(x, y, 4.0, style.mark_color, "none" if down else style.mark_color,
                   cls="estimate")
        svg.text(cx, style.height - 10,
                 f"cardinal {estimate.cardinal:.1f}°, off-stalk {estimate.off_stalk:.1f}°",
                 style.font_size)
    svg.text(cx, 18, title, style.font_size + 2)
    return Report("polar", svg.render(), POLAR_HEADER, rows)


# -- precision / recall ----------------------------------------------------

def _envelope(precisions):
    env = list(precisions)
    for k in range(len(env) - 2, -1, -1):
        env[k] = max(env[k], env[k + 1])
    return env


def pr_report(curve, title="precision-recall", style: Style | None = None) -> Report:
    """Precision-recall chart; the envelope is drawn as a step line."""
    style = style or Style()
    if not curve.points:
        raise ValueError("precision-recall curve has no points")
    svg = _Svg(style.width, style.height, title)
    m, w, h = style.margin, style.width - 2 * style.margin, style.height - 2 * style.margin

    def xy(r, p):
        return m + r * w, m + (1.0 - p) * h

    svg.line(m, m + h, m + w, m + h, style.axis_color)
    svg.line(m, m, m, m + h, style.axis_color)
    for k in range(6):
        v = k / 5.0
        x, y = xy(v, v)
        svg.line(x, m + h, x, m + h + 4, style.axis_color)
        svg.text(x, m + h + 16, f"{v:.1f}", style.font_size - 2)
        svg.line(m - 4, y, m, y, style.axis_color)
        svg.text(m - 6, y + 4, f"{v:.1f}", style.font_size - 2, anchor="end")
    svg.text(m + w / 2.0, style.height - 6, "recall", style.font_size)
    svg.text(12, m - 12, "precision", style.font_size, anchor="start")

    recall = [r for r, _ in curve.points]
    precision = [p for _, p in curve.points]
    env = _envelope(precision)
    steps = [xy(0.0, env[0])]
    prev = 0.0
    for r, p in zip(recall, env):
        if r > prev:
            steps.append(xy(prev, p))
            steps.append(xy(r, p))
            prev = r
    steps.append(xy(prev, 0.0))
    svg.polyline(steps, style.mark_color, 1.5, cls="envelope")
    for r, p in zip(recall, precision):
        x, y = xy(r, p)
        svg.circle(x, y, 2.0, style.line_color, style.line_color)
    svg.text(m + w - 4, m + 16, f"AP = {curve.ap:.4f}", style.font_size, anchor="end")
    svg.text(style.width / 2.0, 18, title, style.font_size + 2)
    rows = [[k + 1, r, p, e] for k, (r, p, e) in enumerate(zip(recall, precision, env))]
    return Report("pr_curve", svg.render(), PR_HEADER, rows)


# -- temporal --------------------------------------------------------------

def temporal_report(rows, title="off-stalk angle over time", style: Style | None = None) -> Report:
    """Mean off-stalk angle per date with a +-1 std band.

    Dates are spaced evenly in sorted order; ``rows`` are
    :class:`~earpose.metrics.TemporalRow`.
    """
    style = style or Style(width=640, height=400)
    rows = sorted(rows, key=lambda r: r.date)
    if not rows:
        raise ValueError("temporal report needs at least one dated run")
    svg = _Svg(style.width, style.height, title)
    m, w, h = style.margin, style.width - 2 * style.margin, style.height - 2 * style.margin

    def xy(i, psi):
        frac = 0.5 if len(rows) == 1 else i / (len(rows) - 1)
        return m + frac * w, m + (1.0 - psi / 180.0) * h

    svg.line(m, m + h, m + w, m + h, style.axis_color)
    svg.line(m, m, m, m + h, style.axis_color)
    for psi in (0, 45, 90, 135, 180):
        _, y = xy(0, psi)
        svg.line(m - 4, y, m + w, y, style.axis_color, 0.5, dash="2,3")
        svg.text(m - 6, y + 4, f"{psi}", style.font_size - 2, anchor="end")
    upper = [xy(i, min(180.0, r.mean_off_stalk + r.std_off_stalk)) for i, r in enumerate(rows)]
    lower = [xy(i, max(0.0, r.mean_off_stalk - r.std_off_stalk)) for i, r in enumerate(rows)]
    svg.polygon(upper + lower[::-1], style.line_color)
    mean = [xy(i, r.mean_off_stalk) for i, r in enumerate(rows)]
    svg.polyline(mean, style.mark_color, 1.5, cls="mean")
    for (x, y), r in zip(mean, rows):
        svg.circle(x, y, 3.0, style.mark_color, style.mark_color)
        svg.text(x, m + h + 16, r.date, style.font_size - 2)
    svg.text(14, m - 12, "off-stalk (deg)", style.font_size, anchor="start")
    svg.text(style.width / 2.0, 18, title, style.font_size + 2)
    table = [[r.date, r.mean_off_stalk, r.std_off_stalk, r.n, r.fraction_down] for r in rows]
    return Report("temporal", svg.render(), TEMPORAL_HEADER, table)


def write_report(report: Report, svg_path, csv_path):
    from .formats import write_csv

    with open(svg_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.svg)
    write_csv(csv_path, report.header, report.rows)
