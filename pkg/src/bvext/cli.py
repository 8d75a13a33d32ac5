"""Command-line front end.

Exit codes: 0 pass, 2 validation error, 3 ledger failure, 4 I/O error.
"""
from __future__ import annotations

import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import click
import numpy as np

from . import svg
from .geom import GeometryError
from .perimeter import (
    DecompositionError,
    PerimeterSet,
    decompose,
    perimeter,
    recompose,
    sym_diff_area,
    verify_decomposition,
)
from .pwamap import PwaMap, hole_correspondence, lip_constant, triangulate
from .quasiconvex import quasiconvexity_constant
from .scene import Scene, SceneError, dumps, gen_random_scene, parse_scene
from .transfer import LedgerViolation, PreconditionError, baseline_extension, transfer_extension

EXIT_OK, EXIT_VALIDATION, EXIT_LEDGER, EXIT_IO = 0, 2, 3, 4


def write_atomic(path: str | Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename over the target."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _finite(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, default=_json_default) + "\n"


def _set_json(E: PerimeterSet) -> dict:
    return {
        "cobounded": E.cobounded,
        "polygons": [
            {
                "outer": np.asarray(p.exterior.coords)[:-1].tolist(),
                "holes": [np.asarray(r.coords)[:-1].tolist() for r in p.interiors],
            }
            for p in E.polygons
        ],
    }


class Failure(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def _load(path: str) -> Scene:
    try:
        return parse_scene(path)
    except OSError as exc:
        raise Failure(EXIT_IO, f"cannot read scene: {exc}") from exc
    except SceneError as exc:
        raise Failure(EXIT_VALIDATION, f"invalid scene: {exc}") from exc


def _emit(report: dict, report_path: str | None, svg_text: str | None, svg_path: str | None) -> None:
    try:
        if svg_path and svg_text is not None:
            write_atomic(svg_path, svg_text)
        if report_path:
            write_atomic(report_path, _dump(report))
        else:
            click.echo(_dump(report), nl=False)
    except OSError as exc:
        raise Failure(EXIT_IO, f"cannot write output: {exc}") from exc


def _run(fn):
    """Translate failures into exit codes."""
    try:
        code = fn()
    except Failure as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.code)
    sys.exit(code or EXIT_OK)


def _identity_map(scene: Scene) -> PwaMap:
    return PwaMap.identity(triangulate(scene.domain))


def _transfer_inputs(scene: Scene):
    """(f, E', extension) with the defaults for missing pieces."""
    if scene.set is None:
        raise Failure(EXIT_VALIDATION, "transfer needs a 'set' in the scene")
    f = scene.map if scene.map is not None else _identity_map(scene)
    ext = scene.extension
    if ext is None:
        ext, _ = baseline_extension(scene.domain, scene.pullback())
    return f, scene.set, ext


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Perimeter-extension transfer across bi-Lipschitz maps of planar domains."""


_tol = click.option("--tol", type=float, default=1e-6, show_default=True, help="Relative ledger tolerance.")
_svg = click.option("--svg", "svg_path", type=click.Path(dir_okay=False), help="Write an SVG figure here.")
_report = click.option("--report", "report_path", type=click.Path(dir_okay=False), help="Write the JSON report here.")
_seed = click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True)
_samples = click.option(
    "--samples", type=click.IntRange(0), default=10_000, show_default=True, help="Random pairs for quasiconvexity."
)


@main.command("decompose")
@click.argument("scene_path", type=click.Path())
@click.option(
    "--which",
    type=click.Choice(["auto", "set", "extension", "domain"]),
    default="auto",
    show_default=True,
    help="Set to decompose; auto takes the set, then the extension, then the domain.",
)
@_svg
@_report
def decompose_cmd(scene_path, which, svg_path, report_path):
    """Jordan-curve decomposition of a set of the scene."""

    def go():
        scene = _load(scene_path)
        options = {"set": scene.set, "extension": scene.extension, "domain": scene.domain.omega}
        if which == "auto":
            name = next(k for k in ("set", "extension", "domain") if options[k] is not None)
        else:
            name = which
        E = options[name]
        if E is None:
            raise Failure(EXIT_VALIDATION, f"the scene has no '{name}'")
        try:
            d = decompose(E)
        except DecompositionError as exc:
            raise Failure(EXIT_LEDGER, f"decomposition failed: {exc}") from exc
        curves = lambda cs: [
            {"length": c.length, "kind": c.kind.value, "vertices": c.vertices[:-1].tolist()} for c in cs
        ]
        total = perimeter(E)
        report = {
            "command": "decompose",
            "scene": scene.name,
            "target": name,
            "positives": curves(d.positives),
            "negatives": curves(d.negatives),
            "components": [{"positive": c.positive, "negatives": list(c.negatives)} for c in d.components],
            "perimeter": total,
            "length_sum": d.total_length,
            "roundtrip_area": sym_diff_area(recompose(d), E),
        }
        text = svg.render(
            [
                svg.Layer("domain", [scene.domain.omega], stroke="#999999"),
                svg.Layer("positives", d.positives, stroke=svg.PALETTE[0], width=1.5),
                svg.Layer("negatives", d.negatives, stroke=svg.PALETTE[1], width=1.5),
            ]
        )
        _emit(report, report_path, text, svg_path)
        return EXIT_OK

    _run(go)


@main.command("quasiconvex")
@click.argument("scene_path", type=click.Path())
@_samples
@_seed
@_report
def quasiconvex_cmd(scene_path, samples, seed, report_path):
    """Estimated quasiconvexity constant of every hole (and image hole)."""

    def go():
        scene = _load(scene_path)

        def table(domain):
            rows = []
            for j, hole in enumerate(domain.holes):
                est = quasiconvexity_constant(hole, samples, seed)
                rows.append(
                    {
                        "hole": j,
                        "unbounded": hole.unbounded,
                        "constant": est.constant,
                        "witness": None if est.witness is None else [list(p) for p in est.witness],
                        "pairs": est.pairs_tested,
                    }
                )
            return rows

        report = {"command": "quasiconvex", "scene": scene.name, "samples": samples, "seed": seed, "holes": table(scene.domain)}
        if scene.map is not None:
            report["image_holes"] = table(scene.image_domain)
        _emit(report, report_path, None, None)
        return EXIT_OK

    _run(go)


def _ledger_report(scene: Scene, ledger, result: PerimeterSet | None, tol: float) -> dict:
    return {
        "command": "transfer",
        "scene": scene.name,
        "tolerance": tol,
        "passed": ledger.passed,
        "checks": [
            {"name": c.name, "lhs": _finite(c.lhs), "rhs": _finite(c.rhs), "tol": c.tol, "passed": c.passed}
            for c in ledger.checks
        ],
        "ledger": ledger.to_dict(),
        "timings": ledger.timings,
        "extension_image": None if result is None else _set_json(result),
    }


@main.command("transfer")
@click.argument("scene_path", type=click.Path())
@_tol
@_svg
@_report
@_seed
@_samples
def transfer_cmd(scene_path, tol, svg_path, report_path, seed, samples):
    """Transfer the scene's extension across its map and check the ledger."""

    def go():
        scene = _load(scene_path)
        f, E_img, ext = _transfer_inputs(scene)
        try:
            result, ledger = transfer_extension(
                scene.domain, scene.image_domain, f, E_img, ext, samples=samples, tol=tol, seed=seed
            )
        except PreconditionError as exc:
            raise Failure(EXIT_VALIDATION, f"precondition failed: {exc}") from exc
        except LedgerViolation as exc:
            _emit(_ledger_report(scene, exc.ledger, None, tol), report_path, exc.svg, svg_path)
            click.echo(f"error: {exc}", err=True)
            return EXIT_LEDGER
        text = svg.render(
            [
                svg.Layer("image_domain", [scene.image_domain.omega], stroke="#999999"),
                svg.Layer("set", [E_img], stroke=svg.PALETTE[2]),
                svg.Layer("extension_image", [result], stroke=svg.PALETTE[1], width=1.5),
            ]
        )
        _emit(_ledger_report(scene, ledger, result, tol), report_path, text, svg_path)
        return EXIT_OK

    _run(go)


def run_checks(scene: Scene, tol: float = 1e-6, samples: int = 10_000, seed: int = 0) -> list[dict]:
    """Invariant suite over one scene; each entry has name, passed and a detail."""
    out = []

    def add(name, passed, detail=""):
        out.append({"name": name, "passed": bool(passed), "detail": detail})

    sets = [("domain", scene.domain.omega)]
    if scene.set is not None:
        sets.append(("set", scene.set))
    if scene.extension is not None:
        sets.append(("extension", scene.extension))
    for name, E in sets:
        try:
            d = decompose(E, check=False)
        except DecompositionError as exc:
            add(f"decompose[{name}]", False, str(exc))
            continue
        problems = verify_decomposition(d, E)
        add(f"decomposition_properties[{name}]", not problems, "; ".join(problems))
        P = perimeter(E)
        add(f"decomposition_length[{name}]", abs(P - d.total_length) <= 1e-9 * P, f"{P} vs {d.total_length}")
        diff = sym_diff_area(recompose(d), E)
        add(f"roundtrip[{name}]", diff <= E.eps_area, f"{diff:g}")
    if scene.map is not None:
        try:
            L = lip_constant(scene.map)
            add("lip_constant", math.isfinite(L), f"{L:g}")
            match = hole_correspondence(scene.map, scene.domain, scene.image_domain)
            add("hole_correspondence", True, str(match.pairs))
        except GeometryError as exc:
            add("map", False, str(exc))
    if scene.set is not None:
        try:
            f, E_img, ext = _transfer_inputs(scene)
            _, ledger = transfer_extension(
                scene.domain, scene.image_domain, f, E_img, ext, samples=samples, tol=tol, seed=seed, strict=False
            )
            for c in ledger.checks:
                add(f"ledger.{c.name}", c.passed, f"{c.lhs:.12g} <= {c.rhs:.12g}")
        except (PreconditionError, GeometryError) as exc:
            add("transfer", False, str(exc))
    return out


@main.command("check")
@click.argument("scene_path", type=click.Path())
@_tol
@_seed
@_samples
@_report
def check_cmd(scene_path, tol, seed, samples, report_path):
    """Run the invariant suite over a scene."""

    def go():
        scene = _load(scene_path)
        t0 = time.perf_counter()
        checks = run_checks(scene, tol, samples, seed)
        ok = all(c["passed"] for c in checks)
        report = {
            "command": "check",
            "scene": scene.name,
            "passed": ok,
            "checks": checks,
            "timings": {"total": time.perf_counter() - t0},
        }
        _emit(report, report_path, None, None)
        return EXIT_OK if ok else EXIT_LEDGER

    _run(go)


@main.command("gen")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@_seed
@click.option("--complexity", type=click.Choice(["small", "medium", "large"]), default="small", show_default=True)
def gen_cmd(out_path, seed, complexity):
    """Write a seeded random scene."""

    def go():
        scene = gen_random_scene(seed, complexity)
        try:
            write_atomic(out_path, dumps(scene))
        except OSError as exc:
            raise Failure(EXIT_IO, f"cannot write scene: {exc}") from exc
        return EXIT_OK

    _run(go)


if __name__ == "__main__":
    main()
