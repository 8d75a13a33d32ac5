"""Minimal SVG 1.1 export of polylines, curves and sets for debugging."""
from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np
import shapely

from .geom import PolyCurve, PolyLine
from .perimeter import PerimeterSet

SVG_NS = "http://www.w3.org/2000/svg"

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"]


@dataclass
class Layer:
    name: str
    items: list = field(default_factory=list)
    stroke: str = "#000000"
    fill: str = "none"
    width: float = 1.0


def _rings(item) -> list[tuple[np.ndarray, bool]]:
    """(vertices, closed) pairs for anything drawable."""
    if isinstance(item, PolyCurve):
        return [] if item.is_formal else [(item.vertices, True)]
    if isinstance(item, PolyLine):
        return [(item.vertices, item.closed)]
    if isinstance(item, PerimeterSet):
        return [(c.vertices, True) for c in item.curves if not c.is_formal]
    if isinstance(item, shapely.Geometry):
        out = []
        for part in shapely.get_parts(item):
            if isinstance(part, shapely.Polygon):
                out.append((np.asarray(part.exterior.coords), True))
                out.extend((np.asarray(r.coords), True) for r in part.interiors)
            elif isinstance(part, (shapely.LineString, shapely.LinearRing)):
                out.append((np.asarray(part.coords), part.is_closed))
        return out
    arr = np.asarray(item, dtype=float).reshape(-1, 2)
    return [(arr, False)]


def render(layers: list[Layer], size: float = 800.0, margin: float = 0.05) -> str:
    """SVG document with one group per layer and one path per curve."""
    rings = [[r for it in layer.items for r in _rings(it)] for layer in layers]
    pts = [v for rs in rings for v, _ in rs if len(v)]
    if pts:
        allp = np.concatenate(pts)
        lo, hi = allp.min(axis=0), allp.max(axis=0)
    else:
        lo, hi = np.zeros(2), np.ones(2)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-12))
    lo = lo - margin * span
    span *= 1 + 2 * margin
    scale = size / span

    def tx(v: np.ndarray) -> np.ndarray:
        # flip y so that the plane's orientation is preserved on screen
        return np.column_stack([(v[:, 0] - lo[0]) * scale, size - (v[:, 1] - lo[1]) * scale])

    ET.register_namespace("", SVG_NS)
    root = ET.Element(
        f"{{{SVG_NS}}}svg",
        {"version": "1.1", "width": f"{size:g}", "height": f"{size:g}", "viewBox": f"0 0 {size:g} {size:g}"},
    )
    for layer, rs in zip(layers, rings):
        g = ET.SubElement(
            root,
            f"{{{SVG_NS}}}g",
            {
                "id": layer.name,
                "stroke": layer.stroke,
                "fill": layer.fill,
                "stroke-width": f"{layer.width:g}",
                "fill-rule": "evenodd",
            },
        )
        for v, closed in rs:
            if len(v) == 0:
                continue
            s = tx(np.asarray(v, dtype=float))
            d = "M " + " L ".join(f"{x:.4f} {y:.4f}" for x, y in s) + (" Z" if closed else "")
            ET.SubElement(g, f"{{{SVG_NS}}}path", {"d": d})
    return ET.tostring(root, encoding="unicode", xml_declaration=True)


def count_paths(svg_text: str) -> int:
    root = ET.fromstring(svg_text)
    return len(root.findall(f".//{{{SVG_NS}}}path"))
