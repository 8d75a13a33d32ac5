import json
import os
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from bvext.cli import main, run_checks, write_atomic
from bvext.perimeter import sym_diff_area
from bvext.scene import SceneError, dumps, gen_random_scene, parse_scene, scene_from_dict

FIXTURES = Path(__file__).parent / "fixtures"
ANNULUS = {
    "domain": {"outer": [[0, 0], [3, 0], [3, 3], [0, 3]], "holes": [[[1, 1], [1, 2], [2, 2], [2, 1]]]},
    "meta": {"name": "annulus"},
}
SVG = "{http://www.w3.org/2000/svg}"


def write(tmp_path, data, name="scene.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data, indent=1))
    return str(p)


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


# -- parsing ---------------------------------------------------------------


def test_parse_minimal_square(tmp_path):
    scene = parse_scene(write(tmp_path, {"domain": {"outer": [[0, 0], [1, 0], [1, 1], [0, 1]]}}))
    assert scene.map is None and scene.set is None
    assert scene.domain.polygon.area == 1.0


def test_parse_missing_domain_names_it(tmp_path):
    with pytest.raises(SceneError) as info:
        parse_scene(write(tmp_path, {"meta": {"name": "x"}}))
    assert info.value.field == "domain" and "domain" in str(info.value)


def test_parse_reports_line_of_bad_field(tmp_path):
    data = {"domain": {"outer": [[0, 0], [1, 0], [1, "a"], [0, 1]]}}
    with pytest.raises(SceneError) as info:
        parse_scene(write(tmp_path, data))
    assert info.value.line is not None and info.value.field.startswith("domain.outer")


def test_parse_fixture():
    scene = parse_scene(FIXTURES / "annulus_shear.json")
    assert len(scene.domain.hole_rings) == 1 and scene.map is not None
    assert scene.set is not None and scene.extension is not None
    assert scene.name == "annulus_shear"


def test_parse_set_outside_domain_names_offender():
    data = dict(ANNULUS, set=[{"outer": [[0.2, 0.2], [0.8, 0.2], [0.8, 0.8]]}, {"outer": [[2.5, 2.5], [4, 2.5], [4, 4]]}])
    with pytest.raises(SceneError) as info:
        scene_from_dict(data)
    assert info.value.field == "set[1]"


def test_parse_rejects_bad_map():
    tri = [[0, 0], [3, 0], [3, 3]]
    data = {"domain": {"outer": [[0, 0], [3, 0], [3, 3], [0, 3]]}, "map": {"triangles": [{"src": tri, "dst": tri}]}}
    with pytest.raises(SceneError) as info:
        scene_from_dict(data)
    assert info.value.field == "map.triangles"


def test_scene_round_trip():
    for seed in range(5):
        scene = gen_random_scene(seed, "small")
        again = scene_from_dict(json.loads(dumps(scene)))
        assert sym_diff_area(again.domain.omega, scene.domain.omega) <= scene.domain.eps_area
        assert sym_diff_area(again.set, scene.set) <= scene.image_domain.eps_area
        assert np.abs(again.map.dst - scene.map.dst).max() <= scene.domain.eps_geom
        assert dumps(again) == dumps(scene)


# -- generator ---------------------------------------------------------------


def test_gen_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert invoke("gen", "--out", a, "--seed", 0).exit_code == 0
    assert invoke("gen", "--out", b, "--seed", 0).exit_code == 0
    assert a.read_bytes() == b.read_bytes()
    assert invoke("gen", "--out", b, "--seed", 1).exit_code == 0
    assert a.read_bytes() != b.read_bytes()


def test_gen_small_vertex_budget():
    for seed in range(20):
        scene = gen_random_scene(seed, "small")
        assert scene.vertex_count <= 64
        assert 0 <= len(scene.domain.hole_rings) <= 4


def test_gen_accepts_full_seed_range(tmp_path):
    assert invoke("gen", "--out", tmp_path / "s.json", "--seed", 2**64 - 1).exit_code == 0


# -- commands ---------------------------------------------------------------


def test_decompose_annulus(tmp_path):
    svg_path, rep = tmp_path / "d.svg", tmp_path / "d.json"
    res = invoke("decompose", write(tmp_path, ANNULUS), "--svg", svg_path, "--report", rep)
    assert res.exit_code == 0
    report = json.loads(rep.read_text())
    assert report["target"] == "domain"
    assert len(report["positives"]) == 1 and len(report["negatives"]) == 1
    assert report["perimeter"] == report["length_sum"] == 16.0
    root = ET.parse(svg_path).getroot()
    groups = {g.get("id"): g for g in root.iter(f"{SVG}g")}
    assert len(groups["positives"].findall(f"{SVG}path")) == 1
    assert len(groups["negatives"].findall(f"{SVG}path")) == 1


def test_decompose_missing_set_is_validation_error(tmp_path):
    res = invoke("decompose", write(tmp_path, ANNULUS), "--which", "set")
    assert res.exit_code == 2


def test_quasiconvex_convex_hole(tmp_path):
    data = {
        "domain": {"outer": [[0, 0], [6, 0], [6, 6], [0, 6]], "holes": [[[2, 2], [2, 4], [4, 4], [4, 2]]]},
    }
    res = invoke("quasiconvex", write(tmp_path, data), "--samples", 2000)
    assert res.exit_code == 0
    holes = json.loads(res.output)["holes"]
    bounded = [h for h in holes if not h["unbounded"]]
    assert len(bounded) == 1 and bounded[0]["constant"] == pytest.approx(1.0, abs=1e-9)


def test_transfer_fixture_passes(tmp_path):
    rep, svg_path = tmp_path / "t.json", tmp_path / "t.svg"
    res = invoke("transfer", FIXTURES / "annulus_shear.json", "--report", rep, "--svg", svg_path, "--samples", 2000)
    assert res.exit_code == 0, res.output
    report = json.loads(rep.read_text())
    assert report["passed"] and all(c["passed"] for c in report["checks"])
    names = [c["name"] for c in report["checks"]]
    assert len(names) == len(set(names))
    assert {"pullback_perimeter", "restriction", "extension_bound", "final_chain"} <= set(names)
    ET.parse(svg_path)


def test_transfer_ledger_failure_exit_code(tmp_path):
    rep, svg_path = tmp_path / "t.json", tmp_path / "t.svg"
    res = invoke("transfer", FIXTURES / "annulus_shear.json", "--tol", -0.5, "--report", rep, "--svg", svg_path, "--samples", 200)
    assert res.exit_code == 3
    assert not json.loads(rep.read_text())["passed"]
    assert svg_path.exists()


def test_exit_codes_for_bad_inputs(tmp_path):
    assert invoke("transfer", tmp_path / "missing.json").exit_code == 4
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert invoke("transfer", bad).exit_code == 2
    # transfer needs a set
    assert invoke("transfer", write(tmp_path, ANNULUS)).exit_code == 2
    assert invoke("gen", "--out", tmp_path / "no" / "dir" / "x.json").exit_code == 4


def test_check_command(tmp_path):
    path = tmp_path / "s.json"
    invoke("gen", "--out", path, "--seed", 7)
    rep = tmp_path / "c.json"
    res = invoke("check", path, "--report", rep, "--samples", 500)
    assert res.exit_code == 0
    report = json.loads(rep.read_text())
    assert report["passed"] and any(c["name"].startswith("ledger.") for c in report["checks"])


def test_atomic_write_leaves_no_temporaries(tmp_path):
    target = tmp_path / "out.txt"
    target.write_text("old")
    write_atomic(target, "new")
    assert target.read_text() == "new"
    assert os.listdir(tmp_path) == ["out.txt"]


def test_generated_scenes_pass_check():
    failures = []
    for seed in range(100):
        checks = run_checks(gen_random_scene(seed, "small"), samples=1000)
        bad = [c["name"] for c in checks if not c["passed"]]
        if bad:
            failures.append((seed, bad))
    assert failures == []
