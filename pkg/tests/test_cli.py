import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from qtbtc import cli
from qtbtc.imageio import GrayImage, save_pgm


@pytest.fixture
def cam_path(tmp_path, camera):
    p = tmp_path / "cam.pgm"
    save_pgm(p, camera)
    return p


def moving_square(step, size=256):
    y, x = np.mgrid[:size, :size]
    bg = (x * 3 + y * 5) % 97 + 60
    frame = bg.copy()
    ox, oy = 100 + 2 * step, 80 + step
    frame[oy : oy + 32, ox : ox + 32] = 220 - ((x[:32, :32] * 7 + y[:32, :32] * 11) % 40)
    return GrayImage.from_array(frame)


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_encode_btc_ratio(capsys, cam_path, tmp_path):
    code, out, _ = run(capsys, "encode", cam_path, "--mode", "btc", "-o", tmp_path / "a.qtr")
    assert code == 0
    assert "ratio              4.000:1" in out
    code, out, _ = run(capsys, "encode", cam_path, "--mode", "sn2", "-o", tmp_path / "b.qtr")
    assert "ratio              9.143:1" in out


def test_btcq_zero_thresholds_decode_identically(capsys, cam_path, tmp_path):
    run(capsys, "encode", cam_path, "--mode", "btc", "-o", tmp_path / "a.qtr")
    run(capsys, "encode", cam_path, "--mode", "btcq", "--mad", 0, "--mbd", 0, "-o", tmp_path / "b.qtr")
    run(capsys, "decode", tmp_path / "a.qtr", "-o", tmp_path / "a.pgm")
    run(capsys, "decode", tmp_path / "b.qtr", "-o", tmp_path / "b.pgm")
    assert (tmp_path / "a.pgm").read_bytes() == (tmp_path / "b.pgm").read_bytes()


def test_encode_report_and_histogram(capsys, cam_path, tmp_path):
    code, out, _ = run(
        capsys, "encode", cam_path, "--mode", "btcq", "--mad", 5, "--mbd", 6, "--report", "--histogram", "-o", tmp_path / "c.qtr"
    )
    assert code == 0
    assert "MSE" in out and "increment" in out
    assert out.count("leaf blocks") == 3
    assert "16384 leaf blocks" in out


def test_encode_is_deterministic(capsys, cam_path, tmp_path):
    for name in ("x.qtr", "y.qtr"):
        run(capsys, "encode", cam_path, "--mode", "sn2q", "--mad", 4, "--mbd", 1, "-o", tmp_path / name)
    assert (tmp_path / "x.qtr").read_bytes() == (tmp_path / "y.qtr").read_bytes()


def test_corrupt_magic(capsys, cam_path, tmp_path):
    run(capsys, "encode", cam_path, "--mode", "btc", "-o", tmp_path / "a.qtr")
    data = bytearray((tmp_path / "a.qtr").read_bytes())
    data[0] ^= 0xFF
    (tmp_path / "bad.qtr").write_bytes(bytes(data))
    code, _, err = run(capsys, "decode", tmp_path / "bad.qtr", "-o", tmp_path / "bad.pgm")
    assert code != 0 and "magic" in err


def test_usage_errors(capsys, cam_path, tmp_path):
    code, _, err = run(capsys, "encode", cam_path, "--mode", "btc", "--mad", 3, "-o", tmp_path / "a.qtr")
    assert code == 1 and "--mad" in err
    code, _, _ = run(capsys, "encode", tmp_path / "missing.pgm", "-o", tmp_path / "a.qtr")
    assert code == 1


def test_sweep_csv(capsys, cam_path, tmp_path):
    out_csv = tmp_path / "s.csv"
    code, _, _ = run(capsys, "sweep", cam_path, "--axis", "mad", "--mad-range", "0:6", "-o", out_csv)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out_csv.read_text())))
    assert len(rows) == 7
    inc = [float(r["increment_pct"]) for r in rows]
    assert all(a <= b for a, b in zip(inc, inc[1:]))
    code, out, _ = run(capsys, "encode", cam_path, "--mode", "btc", "--report", "-o", tmp_path / "p.qtr")
    btc_mse = float(next(l for l in out.splitlines() if l.startswith("MSE")).split()[1])
    assert float(rows[0]["mse"]) == pytest.approx(btc_mse, abs=1e-4)


def test_sweep_grid_parallel_matches_serial(camera):
    pts = cli.sweep_grid("grid", [0, 4], [0, 3])
    assert pts == [(0, 0), (0, 3), (4, 0), (4, 3)]
    serial = cli.run_sweep(camera, cli.Mode.SN2_QT, pts, 1)
    parallel = cli.run_sweep(camera, cli.Mode.SN2_QT, pts, 2)
    assert serial == parallel


def test_motion_identical_frames(capsys, tmp_path):
    f = moving_square(0)
    for n in ("a.pgm", "b.pgm"):
        save_pgm(tmp_path / n, f)
    code, out, _ = run(capsys, "motion", tmp_path / "a.pgm", tmp_path / "b.pgm", "--mode", "qt", "-o", tmp_path / "m.qtr")
    assert code == 0
    assert "quadtree bits      144" in out
    assert "16 roots" in out
    code, out, _ = run(capsys, "decode", tmp_path / "m.qtr")
    assert out.count(" 0 0\n") == 256


def test_motion_moving_square(capsys, tmp_path):
    paths = []
    for step in range(3):
        p = tmp_path / f"f{step}.pgm"
        save_pgm(p, moving_square(step))
        paths.append(p)
    code, out, _ = run(capsys, "motion", *paths[:2])
    ratio = float(next(l for l in out.splitlines() if l.startswith("raw/quadtree")).split()[1].rstrip(":1"))
    assert code == 0 and ratio >= 2
    code, out, _ = run(capsys, "motion", *paths, "--mode", "3d", "-o", tmp_path / "p.qtr")
    assert code == 0 and "3d pair bits" in out
    code, out, _ = run(capsys, "motion", *paths[:2], "--mode", "modeqt", "--threshold", 8, "-o", tmp_path / "m.qtr")
    assert code == 0 and "intra blocks" in out
    code, out, _ = run(capsys, "decode", tmp_path / "m.qtr")
    assert out.startswith("row col dx dy mode")


def test_motion_needs_frames(capsys, tmp_path):
    save_pgm(tmp_path / "a.pgm", moving_square(0))
    code, _, err = run(capsys, "motion", tmp_path / "a.pgm", tmp_path / "a.pgm", "--mode", "3d")
    assert code == 1 and "3 frames" in err


def test_metrics_subcommand(capsys, tmp_path):
    a = GrayImage.from_array(np.zeros((8, 8), np.uint8))
    b = GrayImage.from_array(np.full((8, 8), 2, np.uint8))
    save_pgm(tmp_path / "a.pgm", a)
    save_pgm(tmp_path / "b.pgm", b)
    code, out, _ = run(capsys, "metrics", tmp_path / "a.pgm", tmp_path / "b.pgm", "--csv")
    assert code == 0
    assert out.splitlines() == ["mse,mae,snr_db", "4.000000,2.000000,42.110204"]


def test_module_entry_point(tmp_path, camera):
    save_pgm(tmp_path / "c.pgm", camera)
    res = subprocess.run(
        [sys.executable, "-m", "qtbtc", "encode", str(tmp_path / "c.pgm"), "--mode", "btc", "-o", str(tmp_path / "c.qtr")],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0
    assert len((tmp_path / "c.qtr").read_bytes()) == 10 + 4 + 512 * 512 // 16 * 4
