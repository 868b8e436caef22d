import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from surfrig.commands import interp_demo
from surfrig.commands.interp_demo import hinge_meshes, strip_comparison
from surfrig.config import Settings
from surfrig.geometry.mesh import build_adjacency, validate_pair
from surfrig.io.images import load_image, save_color
from surfrig.io.obj import save_obj
from surfrig.io.surfel_set import load_surfel_set, save_surfel_set, to_document
from surfrig.main import main
from surfrig.models.mesh import TriMesh
from surfrig.models.surfel import BlendTopology
from surfrig.rig.binding import bind_surfels
from surfrig.schemas.surfel_set import SurfelSetFile
from tests.conftest import square_strip, unit_triangle

# barycenter at the origin, large enough that one surfel covers the whole view
WIDE_TRIANGLE = TriMesh([[-3000.0, -1000.0, 0.0], [3000.0, -1000.0, 0.0], [0.0, 2000.0, 0.0]], [[0, 1, 2]])
SILENT_ENERGY = {
    "lambda_depth": 0.0,
    "lambda_normal": 0.0,
    "lambda_eye": 0.0,
    "weight_position": 0.0,
    "weight_scaling": 0.0,
}


def run_cli(*argv):
    stdout, stderr = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=stdout, stderr=stderr)
    return code, stdout.getvalue(), stderr.getvalue()


def summary(stdout):
    return json.loads(stdout.strip().splitlines()[-1])


def error_report(stderr):
    return json.loads(stderr.strip().splitlines()[-1])


def write_config(tmp_path, document):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    return str(path)


def small_camera(size=12):
    return {"position": [0.4, 0.4, 3.0], "look_at": [0.4, 0.4, 0.0], "width": size, "height": size}


class TestDeform:
    def test_identity_pose(self, tmp_path):
        save_obj(square_strip(), tmp_path / "strip.obj")
        config = write_config(tmp_path, {"canonical_mesh": "strip.obj", "surfels_per_triangle": 3})
        code, stdout, _ = run_cli("deform", "--config", config, "--out", str(tmp_path / "out"))
        assert code == 0
        report = summary(stdout)
        assert report["n_surfels"] == 6
        assert report["min_det"] == pytest.approx(1.0)
        assert report["all_psd"] is True
        diagnostics = json.loads((tmp_path / "out" / "diagnostics.json").read_text())
        assert [f["det_jacobian"] for f in diagnostics["faces"]] == pytest.approx([1.0, 1.0])
        assert (tmp_path / "out" / "deformed_surfels.json").exists()
        assert (tmp_path / "out" / "deformed_surfels.ply").exists()

    def test_uniform_scale(self, tmp_path):
        mesh = unit_triangle()
        save_obj(mesh, tmp_path / "a.obj")
        save_obj(mesh.transformed(2.0 * np.eye(3)), tmp_path / "b.obj")
        config = write_config(tmp_path, {"canonical_mesh": "a.obj", "deformed_mesh": "b.obj"})
        code, stdout, _ = run_cli("deform", "--config", config, "--out", str(tmp_path / "out"))
        assert code == 0
        assert summary(stdout)["max_det"] == pytest.approx(8.0)

    def test_topology_mismatch(self, tmp_path):
        mesh = square_strip()
        save_obj(mesh, tmp_path / "a.obj")
        save_obj(TriMesh(mesh.vertices, [[0, 1, 2], [0, 3, 2]]), tmp_path / "b.obj")
        config = write_config(tmp_path, {"canonical_mesh": "a.obj", "deformed_mesh": "b.obj"})
        code, _, stderr = run_cli("deform", "--config", config, "--out", str(tmp_path / "out"))
        assert code == 2
        report = error_report(stderr)
        assert report["error"] == "TopologyMismatch"
        assert report["exit_code"] == 2

    def test_config_is_required(self):
        with pytest.raises(SystemExit) as excinfo:
            run_cli("deform")
        assert excinfo.value.code == 2


class TestRender:
    def test_empty_surfel_set_shows_background(self, tmp_path):
        save_obj(square_strip(), tmp_path / "strip.obj")
        save_surfel_set(SurfelSetFile(), tmp_path / "empty.json")
        config = write_config(tmp_path, {
            "canonical_mesh": "strip.obj",
            "surfel_set": "empty.json",
            "camera": small_camera(),
            "background": [0.2, 0.4, 0.6],
        })
        code, stdout, _ = run_cli("render", "--config", config, "--out", str(tmp_path / "out"))
        assert code == 0
        assert summary(stdout)["n_surfels"] == 0
        color = load_image(tmp_path / "out" / "color.png")
        assert np.allclose(color, np.broadcast_to([51, 102, 153], color.shape) / 255.0)

    def test_output_bytes_are_deterministic(self, tmp_path):
        save_obj(square_strip(), tmp_path / "strip.obj")
        config = write_config(tmp_path, {
            "canonical_mesh": "strip.obj",
            "surfels_per_triangle": 4,
            "camera": small_camera(),
            "appearance": {"sh_degree": 1},
            "seed": 3,
        })
        outputs = []
        for name, threads in (("a", "1"), ("b", "1"), ("c", "3")):
            code, stdout, _ = run_cli("render", "--config", config, "--out", str(tmp_path / name), "--threads", threads)
            assert code == 0
            assert summary(stdout)["closure_residual"] < 1e-12
            outputs.append(tmp_path / name)
        for png in ("color.png", "depth.png", "normal.png", "transmittance.png"):
            first = (outputs[0] / png).read_bytes()
            assert all((out / png).read_bytes() == first for out in outputs[1:])

    def test_invalid_camera(self, tmp_path):
        save_obj(square_strip(), tmp_path / "strip.obj")
        config = write_config(tmp_path, {
            "canonical_mesh": "strip.obj",
            "camera": {"position": [0.0, 0.0, 3.0], "up": [0.0, 0.0, 1.0]},
        })
        code, _, stderr = run_cli("render", "--config", config, "--out", str(tmp_path / "out"))
        assert code == 2
        assert error_report(stderr)["error"] == "InvalidCamera"


class TestInterpDemo:
    def test_sweep_and_coverage(self, tmp_path):
        out = tmp_path / "demo"
        code, stdout, _ = run_cli("interp-demo", "--out", str(out), "--seed", "5")
        assert code == 0
        with (out / "interp_sweep.csv").open(newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 11
        assert float(rows[0]["det_lerp"]) == pytest.approx(1.0)
        assert float(rows[-1]["det_jbs"]) == pytest.approx(1.0)
        assert float(rows[5]["det_lerp"]) < 1e-3
        assert float(rows[5]["det_jbs"]) == pytest.approx(1.0, abs=1e-9)

        report = summary(stdout)
        assert report["gap_ga"] > 0
        assert report["gap_jacobian"] < report["gap_ga"]
        for name in ("coverage.csv", "strip_target.png", "strip_jacobian.png", "strip_ga.png"):
            assert (out / name).exists()

    def test_hinge_is_folded_and_stretched(self):
        canonical, deformed = hinge_meshes()
        validate_pair(canonical, deformed)
        assert deformed.vertices[1].tolist() == [4.0, 0.0, 0.0]
        assert deformed.vertices[3][2] > 0.0
        assert np.linalg.norm(deformed.vertices[3]) == pytest.approx(1.0)

    def test_jacobian_rig_covers_the_hinge(self):
        result = strip_comparison(size=48)
        assert result["target_pixels"] > 0
        assert result["gap_jacobian"] == 0
        assert result["gap_ga"] > 0


class TestFit:
    def fit_config(self, tmp_path, iterations=100, **extra):
        save_obj(WIDE_TRIANGLE, tmp_path / "wide.obj")
        save_color(np.full((16, 16, 3), 0.8), tmp_path / "target.png")
        document = {
            "canonical_mesh": "wide.obj",
            "camera": {"width": 16, "height": 16},
            "appearance": {"sh_degree": 0, "base_color": 0.5},
            "energy": SILENT_ENERGY,
            "fit": {"iterations": iterations, "groups": ["color"], "targets": [{"target": "target.png"}]},
        }
        document.update(extra)
        return write_config(tmp_path, document)

    def test_uniform_target(self, tmp_path):
        out = tmp_path / "out"
        code, stdout, _ = run_cli("fit", "--config", self.fit_config(tmp_path), "--out", str(out))
        assert code == 0
        report = summary(stdout)
        assert report["photometric_ratio"] < 0.01
        assert report["final_loss"] <= report["initial_loss"]
        records = [json.loads(line) for line in (out / "loss_log.jsonl").read_text().splitlines()]
        steps = [r for r in records if r["record"] == "iteration"]
        assert len(steps) == report["iterations"]
        losses = [r["loss"] for r in steps]
        assert all(b <= a for a, b in zip(losses, losses[1:]))
        final = records[-1]
        assert final["record"] == "summary"
        assert final["photometric_ratio"] == report["photometric_ratio"]
        assert final["final_photometric"] == pytest.approx(final["photometric_ratio"] * final["initial_photometric"])
        assert len(load_surfel_set(out / "fitted_surfels.json").surfels) == 1

    def test_zero_iterations_write_input_back(self, tmp_path):
        surfels = bind_surfels(WIDE_TRIANGLE, 2, 4, sh_degree=0)
        topology = BlendTopology.uniform(build_adjacency(WIDE_TRIANGLE))
        source = save_surfel_set(to_document(surfels, topology), tmp_path / "input.json")
        config = self.fit_config(tmp_path, iterations=0, surfel_set="input.json")
        out = tmp_path / "out"
        code, stdout, _ = run_cli("fit", "--config", config, "--out", str(out))
        assert code == 0
        assert summary(stdout)["iterations"] == 0
        assert (out / "fitted_surfels.json").read_bytes() == source.read_bytes()
        lines = (out / "loss_log.jsonl").read_text().splitlines()
        assert [json.loads(line)["record"] for line in lines] == ["summary"]

    def test_missing_target(self, tmp_path):
        config = self.fit_config(tmp_path)
        (tmp_path / "target.png").unlink()
        code, _, stderr = run_cli("fit", "--config", config, "--out", str(tmp_path / "out"))
        assert code == 2
        assert error_report(stderr)["error"] == "IoError"


class TestUnexpectedErrors:
    def test_crash_maps_to_internal_error(self, tmp_path, monkeypatch):
        def crash(config, ctx):
            raise RuntimeError("lost a surfel")

        monkeypatch.setattr(interp_demo, "run", crash)
        code, stdout, stderr = run_cli("interp-demo", "--out", str(tmp_path))
        assert code == 4
        assert stdout == ""
        report = error_report(stderr)
        assert report["error"] == "InternalError"
        assert report["exit_code"] == 4
        assert report["detail"] == "RuntimeError: lost a surfel"
        assert report["context"] == {"command": "interp-demo"}


class TestEntryPoints:
    def test_console_scripts_share_main(self):
        tomllib = pytest.importorskip("tomllib")
        pyproject = Path(__file__).resolve().parents[1] / "pyproject.toml"
        scripts = tomllib.loads(pyproject.read_text(encoding="utf-8"))["project"]["scripts"]
        assert scripts == {"surfrig": "surfrig.main:main", "surfhead": "surfrig.main:main"}

    def test_surfhead_thread_variable_reaches_commands(self, tmp_path, monkeypatch):
        seen = []

        def record_threads(config, ctx):
            seen.append(ctx.threads)
            return 0

        monkeypatch.delenv("SURFRIG_THREADS", raising=False)
        monkeypatch.setenv("SURFHEAD_THREADS", "3")
        monkeypatch.setattr("surfrig.main.settings", Settings())
        monkeypatch.setattr(interp_demo, "run", record_threads)
        code, _, _ = run_cli("interp-demo", "--out", str(tmp_path), "--threads", "1")
        assert code == 0
        assert seen == [3]
