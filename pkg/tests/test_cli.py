import json

import numpy as np
import pytest

from rcmkit.cli import main
from rcmkit.geometry import Pose6DoF, PoseTrajectory
from rcmkit.images import save_mask, save_png_rgb
from rcmkit.mesh import save_mesh

from conftest import textured_cube


@pytest.fixture
def inputs(tmp_path):
    """OBJ + texture + trajectory + camera files for a small cube scene."""
    mesh = textured_cube(subdiv=2)
    obj_path = tmp_path / "cube.obj"
    save_mesh(mesh, obj_path)
    tex_path = tmp_path / "tex.png"
    save_png_rgb(mesh.texture, tex_path)
    pose = Pose6DoF(np.array([1, 0, 0, 0.0]), np.array([-0.5, -0.5, 2.5]))
    traj = PoseTrajectory([(0.0, pose)], fps=10.0)
    traj_path = tmp_path / "traj.json"
    traj_path.write_text(json.dumps(traj.to_dict()))
    cam_path = tmp_path / "camera.json"
    cam_path.write_text(
        json.dumps({"fx": 60.0, "fy": 60.0, "cx": 32.0, "cy": 32.0, "width": 64, "height": 64})
    )
    return {"mesh": obj_path, "texture": tex_path, "traj": traj_path, "camera": cam_path}


def render_args(inputs, out, extra=()):
    return [
        "render",
        "--mesh", str(inputs["mesh"]),
        "--texture", str(inputs["texture"]),
        "--trajectory", str(inputs["traj"]),
        "--camera", str(inputs["camera"]),
        "--out", str(out),
        *extra,
    ]


class TestRender:
    def test_single_frame_rcm_only(self, inputs, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(render_args(inputs, out, ["--frames", "1", "--modes", "rcm"]))
        assert code == 0
        assert (out / "frame_0_rcm.png").is_file()
        assert sorted(p.name for p in out.iterdir()) == ["frame_0_rcm.png"]

    def test_all_modes(self, inputs, tmp_path):
        out = tmp_path / "out"
        assert main(render_args(inputs, out, ["--frames", "2"])) == 0
        names = sorted(p.name for p in out.iterdir())
        for i in (0, 1):
            for suffix in ("rcm.png", "rgb.png", "mask.png", "depth.bin", "depth.bin.json"):
                assert f"frame_{i}_{suffix}" in names

    def test_missing_mesh_flag(self, tmp_path, capsys):
        assert main(["render", "--out", str(tmp_path)]) == 1

    def test_unreadable_mesh(self, inputs, tmp_path, capsys):
        args = render_args(inputs, tmp_path / "o")
        args[args.index("--mesh") + 1] = str(tmp_path / "missing.obj")
        assert main(args) == 1
        assert "error:" in capsys.readouterr().err

    def test_deterministic_bytes(self, inputs, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(render_args(inputs, out1, ["--frames", "2"])) == 0
        assert main(render_args(inputs, out2, ["--frames", "2"])) == 0
        for p in sorted(out1.iterdir()):
            assert p.read_bytes() == (out2 / p.name).read_bytes()

    def test_default_camera_is_512(self, inputs, tmp_path):
        from rcmkit.images import load_png_rgb

        out = tmp_path / "out"
        args = render_args(inputs, out, ["--frames", "1", "--modes", "rgb"])
        i = args.index("--camera")
        del args[i : i + 2]
        assert main(args) == 0
        img = load_png_rgb(out / "frame_0_rgb.png")
        assert img.shape == (512, 512, 3)

    def test_background_flag(self, inputs, tmp_path):
        from rcmkit.images import load_png_rgb

        out = tmp_path / "out"
        assert main(render_args(inputs, out, ["--modes", "rgb", "--background", "102030"])) == 0
        img = load_png_rgb(out / "frame_0_rgb.png")
        assert tuple(img[0, 0]) == (0x10, 0x20, 0x30)


class TestCache:
    def test_six_views(self, inputs, tmp_path, capsys):
        out = tmp_path / "cache"
        code = main(
            ["cache", "--mesh", str(inputs["mesh"]), "--texture", str(inputs["texture"]),
             "--views", "6", "--camera", str(inputs["camera"]), "--out", str(out)]
        )
        assert code == 0
        assert "cache.json" in capsys.readouterr().out
        pngs = list(out.glob("*.png"))
        assert len(pngs) == 12
        assert (out / "cache.json").is_file()

    def test_zero_views_rejected(self, inputs, tmp_path, capsys):
        code = main(
            ["cache", "--mesh", str(inputs["mesh"]), "--texture", str(inputs["texture"]),
             "--views", "0", "--camera", str(inputs["camera"]), "--out", str(tmp_path / "c")]
        )
        assert code == 1
        assert "views" in capsys.readouterr().err

    def test_rebuild_identical(self, inputs, tmp_path):
        outs = []
        for name in ("c1", "c2"):
            out = tmp_path / name
            assert main(
                ["cache", "--mesh", str(inputs["mesh"]), "--texture", str(inputs["texture"]),
                 "--views", "3", "--camera", str(inputs["camera"]), "--out", str(out)]
            ) == 0
            outs.append(out)
        for p in sorted(outs[0].iterdir()):
            assert p.read_bytes() == (outs[1] / p.name).read_bytes()


class TestTssim:
    def test_oracle_static(self, inputs, tmp_path, capsys):
        report_path = tmp_path / "report.json"
        code = main(
            ["tssim", "--oracle", "--mesh", str(inputs["mesh"]),
             "--texture", str(inputs["texture"]), "--trajectory", str(inputs["traj"]),
             "--camera", str(inputs["camera"]), "--frames", "5",
             "--splat-radius", "0", "--out", str(report_path)]
        )
        assert code == 0
        printed = capsys.readouterr().out.strip()
        report = json.loads(report_path.read_text())
        assert f"{report['t_ssim']:.4f}" == printed
        assert report["n_frames"] == 5
        assert report["t_ssim"] >= 0.97
        assert report["t_ssim"] == pytest.approx(np.mean(report["per_frame_ssim"]), abs=1e-12)

    def test_manifest_missing_file(self, tmp_path, capsys):
        code = main(["tssim", "--manifest", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "r.json")])
        assert code == 1

    def test_oracle_requires_inputs(self, tmp_path, capsys):
        assert main(["tssim", "--oracle", "--out", str(tmp_path / "r.json")]) == 1

    def test_neither_mode(self, tmp_path):
        assert main(["tssim", "--out", str(tmp_path / "r.json")]) == 1


class TestIou:
    def write_mask(self, path, mask):
        save_mask(mask, path)
        return path

    def test_identical(self, tmp_path, capsys):
        m = np.zeros((16, 16), bool)
        m[4:9, 4:9] = True
        p = self.write_mask(tmp_path / "a.png", m)
        assert main(["iou", str(p), str(p)]) == 0
        assert capsys.readouterr().out.strip() == "1.0000"

    def test_disjoint(self, tmp_path, capsys):
        a = np.zeros((16, 16), bool)
        b = np.zeros((16, 16), bool)
        a[0, 0] = True
        b[5, 5] = True
        pa = self.write_mask(tmp_path / "a.png", a)
        pb = self.write_mask(tmp_path / "b.png", b)
        assert main(["iou", str(pa), str(pb)]) == 0
        assert capsys.readouterr().out.strip() == "0.0000"

    def test_half_vs_three_quarters(self, tmp_path, capsys):
        a = np.zeros((16, 16), bool)
        b = np.zeros((16, 16), bool)
        a[:, :8] = True
        b[:, :12] = True
        pa = self.write_mask(tmp_path / "a.png", a)
        pb = self.write_mask(tmp_path / "b.png", b)
        assert main(["iou", str(pa), str(pb)]) == 0
        assert capsys.readouterr().out.strip() == "0.6667"

    def test_dimension_mismatch(self, tmp_path, capsys):
        pa = self.write_mask(tmp_path / "a.png", np.zeros((8, 8), bool))
        pb = self.write_mask(tmp_path / "b.png", np.zeros((8, 9), bool))
        assert main(["iou", str(pa), str(pb)]) == 1
