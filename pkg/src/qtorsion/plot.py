"""Hand-rolled SVG of polygons with annotated facet normals, and residual
history tables.  Output bytes depend only on the inputs."""

import numpy as np

from .io import csv_text

SIZE = 480
MARGIN = 60
HISTORY_HEADER = ("iter", "phi", "Tq", "residual", "theta")


def _c(x):
    return format(float(x), ".2f")


def _frame(polygons):
    pts = np.vstack([p.vertices for p in polygons])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = float(max(hi - lo))
    s = (SIZE - 2 * MARGIN) / span
    mid = 0.5 * (lo + hi)

    def to_svg(xy):
        xy = np.atleast_2d(xy)
        return np.c_[SIZE / 2 + s * (xy[:, 0] - mid[0]), SIZE / 2 - s * (xy[:, 1] - mid[1])]

    return to_svg, s


def polygon_svg(body, weights=None, title=None, ghosts=()):
    """SVG text of ``body``'s polygon with one arrow per facet normal.

    ``weights`` (one per body normal) label the arrows; ``ghosts`` are
    further bodies drawn underneath in grey.
    """
    poly = body.polygon
    to_svg, s = _frame([poly] + [g.polygon for g in ghosts])
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
           f'viewBox="0 0 {SIZE} {SIZE}">',
           f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>']
    if title:
        out.append(f'<text x="10" y="20" font-family="sans-serif" font-size="14">{title}</text>')
    for g in ghosts:
        out.append(_path(to_svg(g.polygon.vertices), 'fill="none" stroke="#bbbbbb" stroke-width="1"'))
    out.append(_path(to_svg(poly.vertices), 'fill="#dde8f4" stroke="#1f4e79" stroke-width="2"'))
    V = poly.vertices
    arrow = 0.12 * (SIZE - 2 * MARGIN) / s
    for i, k in enumerate(poly.facet_ids):
        a, b = V[i], V[(i + 1) % len(V)]
        m = 0.5 * (a + b)
        tip = m + arrow * body.normals[k]
        (x0, y0), (x1, y1) = to_svg(np.vstack([m, tip]))
        out.append(f'<line x1="{_c(x0)}" y1="{_c(y0)}" x2="{_c(x1)}" y2="{_c(y1)}" '
                   f'stroke="#c0392b" stroke-width="1.5"/>')
        out.append(f'<circle cx="{_c(x1)}" cy="{_c(y1)}" r="2.5" fill="#c0392b"/>')
        if weights is not None:
            lx, ly = to_svg(tip + 0.4 * arrow * body.normals[k])[0]
            out.append(f'<text x="{_c(lx)}" y="{_c(ly)}" font-family="sans-serif" font-size="11" '
                       f'text-anchor="middle">{float(weights[k]):.4g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _path(P, style):
    d = "M " + " L ".join(f"{_c(x)} {_c(y)}" for x, y in P) + " Z"
    return f'<path d="{d}" {style}/>'


def history_rows(history):
    """Rows of the residual table from serialized iteration records."""
    return [(r["iteration"], r["phi"], r["T_q"], r["residual"], r["theta"]) for r in history]


def history_csv(history):
    return csv_text(HISTORY_HEADER, history_rows(history))
