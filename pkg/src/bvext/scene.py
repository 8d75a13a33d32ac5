"""Scene files: domain, optional map, sets, and a seeded random generator."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import jsonschema
import numpy as np
import shapely

from .domain import PlanarDomain
from .geom import GeometryError
from .perimeter import PerimeterSet
from .pwamap import MapError, PwaMap, apply, inverse, lip_constant, triangulate

_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_RING = {"type": "array", "items": _POINT, "minItems": 3}
_POLYGON = {
    "type": "object",
    "properties": {"outer": _RING, "holes": {"type": "array", "items": _RING}},
    "required": ["outer"],
    "additionalProperties": False,
}
_TRIANGLE = {"type": "array", "items": _POINT, "minItems": 3, "maxItems": 3}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "domain": _POLYGON,
        "map": {
            "type": "object",
            "properties": {
                "triangles": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "properties": {"src": _TRIANGLE, "dst": _TRIANGLE},
                        "required": ["src", "dst"],
                        "additionalProperties": False,
                    },
                }
            },
            "required": ["triangles"],
            "additionalProperties": False,
        },
        "set": {"type": "array", "items": _POLYGON},
        "extension": {"type": "array", "items": _POLYGON},
        "meta": {
            "type": "object",
            "properties": {"name": {"type": "string"}, "seed": {"type": "integer"}, "units": {"type": "string"}},
        },
    },
    "required": ["domain"],
    "additionalProperties": False,
}


class SceneError(ValueError):
    """Schema or geometric validation failure, with a location when known."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass(frozen=True, eq=False)
class Scene:
    """With a map, ``set`` lives in the image domain; without one it lives in the domain."""

    domain: PlanarDomain
    map: PwaMap | None = None
    set: PerimeterSet | None = None
    extension: PerimeterSet | None = None
    meta: dict = field(default_factory=dict)

    @cached_property
    def image_domain(self) -> PlanarDomain:
        if self.map is None:
            return self.domain
        return apply(self.map, self.domain)

    @property
    def name(self) -> str:
        return str(self.meta.get("name", "scene"))

    @property
    def vertex_count(self) -> int:
        n = self.domain.vertex_count
        for s in (self.set, self.extension):
            if s is not None:
                n += s.vertex_count
        return n

    def pullback(self) -> PerimeterSet | None:
        """The set seen in the source domain."""
        if self.set is None:
            return None
        return self.set if self.map is None else inverse(self.map).map_set(self.set)


# ---------------------------------------------------------------------------
# parsing


def _line_of(text: str, path: list) -> int | None:
    """Best-effort line number of the JSON value at ``path``."""
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return None
    m = None
    pos = 0
    for k in keys:
        m = re.compile(r'"%s"\s*:' % re.escape(k)).search(text, pos)
        if m is None:
            break
        pos = m.end()
    if m is None:
        return None
    return text.count("\n", 0, m.start()) + 1


def _field_name(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else p)
    return out


def _ring(points) -> np.ndarray:
    return np.asarray(points, dtype=float)


def _polygons(items, grid: float | None, what: str) -> PerimeterSet:
    polys = []
    for k, item in enumerate(items):
        poly = shapely.Polygon(_ring(item["outer"]), [_ring(h) for h in item.get("holes", [])])
        if poly.area <= 0 and not poly.is_valid:
            raise SceneError("degenerate polygon", f"{what}[{k}]")
        polys.append(poly)
    return PerimeterSet.from_polygons(polys, grid)


def scene_from_dict(data: dict, text: str | None = None) -> Scene:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        path = list(e.path)
        if e.validator == "required":
            missing = re.findall(r"'([^']+)' is a required property", e.message)
            path = path + missing[:1]
        line = _line_of(text, path) if text is not None else None
        raise SceneError(e.message, _field_name(path) or "<root>", line)
    d = data["domain"]
    try:
        raw = shapely.Polygon(_ring(d["outer"]), [_ring(h) for h in d.get("holes", [])])
        omega = PerimeterSet.from_polygons([raw])
        domain = PlanarDomain(omega)
    except (GeometryError, shapely.errors.GEOSException) as exc:
        raise SceneError(f"invalid domain: {exc}", "domain") from exc
    if not raw.is_valid:
        raise SceneError(f"invalid domain: {shapely.is_valid_reason(raw)}", "domain")
    fmap = None
    if "map" in data:
        tris = data["map"]["triangles"]
        try:
            fmap = PwaMap(np.array([t["src"] for t in tris]), np.array([t["dst"] for t in tris]))
            lip_constant(fmap)
        except (MapError, GeometryError) as exc:
            raise SceneError(str(exc), "map.triangles") from exc
        cover = fmap.support
        gap = shapely.symmetric_difference(cover, domain.polygon).area
        if gap > domain.eps_area:
            raise SceneError(f"map triangles do not tile the domain (area mismatch {gap:g})", "map.triangles")
    scene = Scene(domain, fmap, meta=dict(data.get("meta", {})))
    target = scene.image_domain
    E = None
    if "set" in data:
        E = _polygons(data["set"], target.grid, "set")
        for k, poly in enumerate(E.polygons):
            out = shapely.difference(poly, target.polygon).area
            if out > target.eps_area:
                label = "image domain" if fmap is not None else "domain"
                raise SceneError(f"set polygon {k} is not contained in the {label} (area {out:g} outside)", f"set[{k}]")
    ext = None
    if "extension" in data:
        ext = _polygons(data["extension"], None, "extension")
    return Scene(domain, fmap, E, ext, scene.meta)


def parse_scene(path: str | Path) -> Scene:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(exc.msg, None, exc.lineno) from exc
    return scene_from_dict(data, text)


# ---------------------------------------------------------------------------
# serialization


def _coords(ring) -> list[list[float]]:
    v = np.asarray(ring.coords)[:-1]
    # start at the lowest vertex so equal rings serialize identically
    k = int(np.lexsort((v[:, 1], v[:, 0]))[0])
    v = np.roll(v, -k, axis=0)
    return [[float(x), float(y)] for x, y in v]


def _polygon_dict(poly: shapely.Polygon) -> dict:
    poly = shapely.orient_polygons(poly)
    return {"outer": _coords(poly.exterior), "holes": [_coords(r) for r in poly.interiors]}


def scene_to_dict(scene: Scene) -> dict:
    out: dict = {"domain": _polygon_dict(scene.domain.polygon)}
    if scene.map is not None:
        out["map"] = {
            "triangles": [
                {"src": s.tolist(), "dst": d.tolist()} for s, d in zip(scene.map.src, scene.map.dst)
            ]
        }
    if scene.set is not None:
        out["set"] = [_polygon_dict(p) for p in scene.set.polygons]
    if scene.extension is not None:
        if scene.extension.cobounded:
            raise SceneError("unbounded extensions cannot be serialized", "extension")
        out["extension"] = [_polygon_dict(p) for p in scene.extension.polygons]
    if scene.meta:
        out["meta"] = dict(scene.meta)
    return out


def dumps(scene: Scene) -> str:
    return json.dumps(scene_to_dict(scene), indent=1) + "\n"


# ---------------------------------------------------------------------------
# random scenes

COMPLEXITY = {
    # outer vertices, vertices per hole, set vertices, extension blob vertices, vertex budget
    "small": (8, 4, 5, 5, 64),
    "medium": (40, 10, 20, 20, 400),
    "large": (300, 50, 100, 100, 1400),
}


def _star(rng: np.random.Generator, center, radius: float, n: int, jag: float = 0.35) -> np.ndarray:
    # keep angular gaps bounded so the polygon stays star-shaped and non-degenerate
    ang = np.linspace(0, 2 * np.pi, n, endpoint=False) + rng.uniform(-0.3, 0.3, n) * (2 * np.pi / n)
    ang += rng.uniform(0, 2 * np.pi)
    r = radius * (1 - jag * rng.uniform(0, 1, n))
    return np.column_stack([center[0] + r * np.cos(ang), center[1] + r * np.sin(ang)])


def _round(pts: np.ndarray, grid: float) -> np.ndarray:
    return np.round(pts / grid) * grid


def _random_domain(rng, sizes, grid) -> PlanarDomain:
    n_outer, n_hole = sizes[0], sizes[1]
    while True:
        outer = shapely.Polygon(_round(_star(rng, (0.0, 0.0), 1.0, n_outer), grid))
        if not outer.is_valid:
            continue
        n_holes = int(rng.integers(0, 5))
        holes: list[shapely.Polygon] = []
        tries = 0
        while len(holes) < n_holes and tries < 50:
            tries += 1
            c = rng.uniform(-0.6, 0.6, 2)
            rad = rng.uniform(0.08, 0.25)
            h = shapely.Polygon(_round(_star(rng, c, rad, n_hole), grid))
            if not h.is_valid or not outer.buffer(-0.05).contains(h):
                continue
            if any(h.distance(o) < 0.05 for o in holes):
                continue
            holes.append(h)
        carved = outer.difference(shapely.union_all(holes)) if holes else outer
        if not isinstance(carved, shapely.Polygon) or len(carved.interiors) != len(holes):
            continue
        try:
            return PlanarDomain(PerimeterSet.from_geometry(carved, grid))
        except GeometryError:
            continue


def _random_map(rng, domain: PlanarDomain, max_lip: float = 4.0) -> PwaMap:
    tris = triangulate(domain)
    while True:
        theta = rng.uniform(0, 2 * np.pi)
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        s = np.diag(rng.uniform(0.6, 1.6, 2))
        phi = rng.uniform(0, 2 * np.pi)
        rot2 = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
        A = rot @ s @ rot2
        offset = rng.uniform(-2, 2, 2)
        flat = tris.reshape(-1, 2)
        keys, inv = np.unique(flat, axis=0, return_inverse=True)
        # jitter each vertex by a fraction of its shortest incident edge
        edges = np.linalg.norm(tris - np.roll(tris, 1, axis=1), axis=2)
        near = np.full(len(keys), np.inf)
        np.minimum.at(near, inv.ravel(), np.minimum(edges, np.roll(edges, -1, axis=1)).ravel())
        for scale in (0.2, 0.1, 0.05, 0.0):
            jitter = rng.uniform(-1, 1, keys.shape) * (scale * near)[:, None]
            img = (keys + jitter) @ A.T + offset
            dst = img[inv.ravel()].reshape(tris.shape)
            try:
                f = PwaMap(tris, dst)
                if lip_constant(f) <= max_lip and f.orientation_preserving:
                    return f
            except (MapError, GeometryError):
                continue


def gen_random_scene(seed: int, complexity: str = "small") -> Scene:
    """Deterministic random scene: domain with 0-4 holes, map, E' and an extension."""
    if complexity not in COMPLEXITY:
        raise ValueError(f"unknown complexity {complexity!r}; choose from {sorted(COMPLEXITY)}")
    sizes = COMPLEXITY[complexity]
    rng = np.random.default_rng(seed)
    grid = 2.0**-20
    while True:
        domain = _random_domain(rng, sizes, grid)
        f = _random_map(rng, domain)
        img = apply(f, domain)
        b = img.polygon.bounds
        diam = img.diameter
        for _ in range(20):
            c = rng.uniform(b[:2], b[2:])
            blob = shapely.Polygon(_star(rng, c, rng.uniform(0.3, 0.7) * diam, sizes[2]))
            if not blob.is_valid:
                continue
            E_img = PerimeterSet.from_geometry(blob, img.grid).intersection(img.omega, img.grid)
            if E_img.area > 0.02 * img.polygon.area and len(E_img.polygons) <= 8:
                break
        else:
            continue
        E = inverse(f).map_set(E_img, domain.grid)
        cx, cy = np.asarray(shapely.centroid(E.geom).coords)[0]
        blob = shapely.Polygon(_star(rng, (cx, cy), rng.uniform(0.2, 0.6) * domain.diameter, sizes[3]))
        if not blob.is_valid:
            continue
        outside = PerimeterSet.from_geometry(blob, domain.grid).difference(domain.omega, domain.grid)
        ext = E.union(outside, domain.grid)
        scene = Scene(domain, f, E_img, ext, {"name": f"random-{complexity}-{seed}", "seed": int(seed)})
        # re-read through the serializer so every scene is exactly what a file holds
        scene = scene_from_dict(json.loads(dumps(scene)))
        if scene.vertex_count <= sizes[4]:
            return scene
