import json

import numpy as np
import pytest

from hypmesh import generate as gen
from hypmesh import pipeline
from hypmesh.cli import main
from hypmesh.mesh import format_node_ele, format_off, mesh_from_arrays, parse_node_ele
from hypmesh.optimizer import SolverConfig
from hypmesh.pipeline import (
    EXIT_IO,
    EXIT_LAYOUT,
    EXIT_NONCONVERGENCE,
    EXIT_OK,
    EXIT_PARSE,
    EXIT_TOPOLOGY,
    PipelineConfig,
    improve_mesh,
    run_pipeline,
    write_report,
    write_svg,
)
from hypmesh.quality import quality_report


def write_node_ele(mesh, tmp_path, name="in"):
    node, ele = format_node_ele(mesh)
    (tmp_path / f"{name}.node").write_text(node)
    (tmp_path / f"{name}.ele").write_text(ele)
    return tmp_path / f"{name}.node", tmp_path / f"{name}.ele"


class TestImproveMesh:
    def test_equilateral_fixed_point(self):
        m = gen.equilateral_patch(4)
        res = improve_mesh(m)
        assert res.exit_code == EXIT_OK
        assert np.max(np.abs(res.mesh.coords - m.coords)) <= 1e-9

    def test_jittered_square(self, jittered_square):
        res = improve_mesh(jittered_square)
        assert res.exit_code == EXIT_OK
        assert res.after.global_min_angle > res.before.global_min_angle
        b = jittered_square.topology.boundary_mask
        np.testing.assert_array_equal(res.mesh.coords[b], jittered_square.coords[b])
        np.testing.assert_array_equal(res.mesh.faces, jittered_square.faces)

    def test_three_holes(self):
        m = gen.holes_plate(30, jitter=0.3, seed=2)
        res = improve_mesh(m)
        assert res.exit_code == EXIT_OK
        assert len(res.cut_paths) == 3
        assert res.mesh.n_vertices == m.n_vertices
        b = m.topology.boundary_mask
        assert np.max(np.abs(res.mesh.coords[b] - m.coords[b])) <= 1e-6 * m.bbox_diagonal()

    def test_clockwise_input_keeps_face_lists(self):
        m = gen.square(6, jitter=0.3, seed=4)
        flipped = mesh_from_arrays(m.coords, m.faces[:, [0, 2, 1]])
        res = improve_mesh(flipped)
        assert res.exit_code == EXIT_OK
        np.testing.assert_array_equal(res.mesh.faces, flipped.faces)

    def test_topology_rejected(self):
        pts = np.array([[0, 0], [1, 0], [0, 1], [5, 5], [6, 5], [5, 6]], float)
        res = improve_mesh(mesh_from_arrays(pts, [[0, 1, 2], [3, 4, 5]]))
        assert res.exit_code == EXIT_TOPOLOGY

    def test_nonconvergence_echoes_input(self, jittered_square):
        res = improve_mesh(jittered_square, solver=SolverConfig(max_iterations=1))
        assert res.exit_code == EXIT_NONCONVERGENCE
        assert res.mesh is jittered_square
        assert res.diagnostic["error"] == "NonConvergence"

    def test_layout_conflict(self, jittered_square, monkeypatch):
        monkeypatch.setattr(pipeline, "CONFLICT_LIMIT", 0.0)
        res = improve_mesh(jittered_square)
        assert res.exit_code == EXIT_LAYOUT
        assert res.mesh is jittered_square
        assert res.diagnostic["max_conflict"] > 0


class TestSvg:
    def test_single_triangle(self, tmp_path):
        m = mesh_from_arrays(np.array([[0, 0], [1, 0], [0, 1]], float), [[0, 1, 2]])
        write_svg(m, tmp_path / "t.svg")
        text = (tmp_path / "t.svg").read_text()
        assert text.count("<polygon") == 1
        assert 'fill="none"' in text

    def test_empty_mesh(self, tmp_path):
        m = mesh_from_arrays(np.zeros((0, 2)), np.zeros((0, 3), dtype=int))
        with pytest.raises(ValueError):
            write_svg(m, tmp_path / "e.svg")
        assert not (tmp_path / "e.svg").exists()

    def test_deterministic(self, tmp_path, jittered_square):
        write_svg(jittered_square, tmp_path / "a.svg")
        write_svg(jittered_square, tmp_path / "b.svg")
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
        assert (tmp_path / "a.svg").read_text().count("<polygon") == jittered_square.n_faces


class TestReport:
    def test_fixed_point_histograms_equal(self, tmp_path):
        res = improve_mesh(gen.equilateral_patch(3))
        write_report(res.before, res.after, res.trace, tmp_path / "r.json")
        d = json.loads((tmp_path / "r.json").read_text())
        h = d["histograms"]["angle"]
        assert h["before"]["counts"] == h["after"]["counts"]
        assert sum(h["before"]["counts"]) == 3 * d["face_count"]

    def test_jittered_keys(self, tmp_path, jittered_square):
        res = improve_mesh(jittered_square)
        write_report(res.before, res.after, res.trace, tmp_path / "r.json",
                     {"max_conflict": res.max_conflict})
        d = json.loads((tmp_path / "r.json").read_text())
        assert d["min_angle"]["after"] > d["min_angle"]["before"]
        for key in ("E_final", "D_final", "max_holonomy_residual", "iterations"):
            assert key in d["solver"]
        assert d["solver"]["iterations"]["maximize_E"] > 0
        assert d["max_conflict"] == res.max_conflict
        assert sum(d["histograms"]["angle"]["after"]["counts"]) == 3 * jittered_square.n_faces


class TestRunPipeline:
    def test_files_and_combinatorics(self, tmp_path, jittered_square):
        node, ele = write_node_ele(jittered_square, tmp_path)
        cfg = PipelineConfig(out=tmp_path / "out", node=node, ele=ele,
                             svg=tmp_path / "o.svg", report=tmp_path / "r.json",
                             trace=tmp_path / "t.json")
        code, diag = run_pipeline(cfg)
        assert code == EXIT_OK and diag is None
        assert (tmp_path / "out.ele").read_text() == ele.read_text()
        out = parse_node_ele((tmp_path / "out.node").read_text(), ele.read_text())
        assert out.n_vertices == jittered_square.n_vertices
        trace = json.loads((tmp_path / "t.json").read_text())
        assert trace["records"]
        report = json.loads((tmp_path / "r.json").read_text())
        assert report["exit_code"] == 0

    def test_idempotent(self, tmp_path):
        m = gen.square(10, jitter=0.3, seed=3)
        node, ele = write_node_ele(m, tmp_path)
        run_pipeline(PipelineConfig(out=tmp_path / "a", node=node, ele=ele,
                                    report=tmp_path / "a.json"))
        run_pipeline(PipelineConfig(out=tmp_path / "b", node=tmp_path / "a.node",
                                    ele=tmp_path / "a.ele", report=tmp_path / "b.json"))
        e1 = json.loads((tmp_path / "a.json").read_text())["solver"]["E_final"]
        e2 = json.loads((tmp_path / "b.json").read_text())["solver"]["E_final"]
        assert abs(e2 - e1) <= 1e-6 * abs(e1)

    def test_off_round_trip(self, tmp_path):
        m = gen.annulus(10, 4, jitter=0.2, seed=1)
        (tmp_path / "in.off").write_text(format_off(m))
        code, _ = run_pipeline(PipelineConfig(out=tmp_path / "out.off", off=tmp_path / "in.off"))
        assert code == EXIT_OK
        assert (tmp_path / "out.off").exists()

    def test_parse_error(self, tmp_path):
        (tmp_path / "bad.off").write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n4 0 1 2 3\n")
        code, diag = run_pipeline(PipelineConfig(out=tmp_path / "o.off", off=tmp_path / "bad.off"))
        assert code == EXIT_PARSE
        assert diag["line"] == 6
        assert not (tmp_path / "o.off").exists()

    def test_io_errors(self, tmp_path, jittered_square):
        code, _ = run_pipeline(PipelineConfig(out=tmp_path / "o.off", off=tmp_path / "none.off"))
        assert code == EXIT_IO
        (tmp_path / "in.off").write_text(format_off(gen.square(3)))
        code, _ = run_pipeline(PipelineConfig(out=tmp_path / "missing" / "o.off",
                                              off=tmp_path / "in.off"))
        assert code == EXIT_IO

    def test_config_validation(self, tmp_path):
        with pytest.raises(ValueError):
            PipelineConfig(out=tmp_path / "o")
        with pytest.raises(ValueError):
            PipelineConfig(out=tmp_path / "o", node=tmp_path / "a.node", off=tmp_path / "a.off")
        with pytest.raises(ValueError):
            PipelineConfig(out=tmp_path / "o", off=tmp_path / "a.off", strategy="fast")


class TestCli:
    def test_generate_then_improve(self, tmp_path, capsys):
        assert main(["generate", "h", "--size", "4", "--jitter", "0.3", "--seed", "2",
                     "--out", str(tmp_path / "h")]) == 0
        code = main(["improve", "--node", str(tmp_path / "h.node"), "--ele",
                     str(tmp_path / "h.ele"), "--out", str(tmp_path / "o"),
                     "--out-format", "off", "--report", str(tmp_path / "r.json"),
                     "--tol-holonomy", "1e-7", "--max-iter", "300"])
        assert code == 0
        assert (tmp_path / "o.off").exists()
        assert capsys.readouterr().err == ""

    def test_failure_prints_json_diagnostic(self, tmp_path, capsys):
        main(["generate", "square", "--size", "6", "--jitter", "0.3", "--out",
              str(tmp_path / "s"), "--format", "off"])
        code = main(["improve", "--off", str(tmp_path / "s.off"), "--out",
                     str(tmp_path / "o.off"), "--max-iter", "1"])
        assert code == EXIT_NONCONVERGENCE
        diag = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert diag["exit_code"] == EXIT_NONCONVERGENCE
        # the input is echoed
        assert (tmp_path / "o.off").read_text() == (tmp_path / "s.off").read_text()

    def test_bad_arguments(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["improve", "--out", str(tmp_path / "o")])
        with pytest.raises(SystemExit):
            main(["generate", "square", "--jitter", "0.7", "--out", str(tmp_path / "g")])


def test_quality_report_of_output_has_no_inversions(jittered_square):
    res = improve_mesh(jittered_square)
    assert quality_report(res.mesh).degenerate_faces == ()
