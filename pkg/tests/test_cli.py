import csv
import re
import shlex
import time
from pathlib import Path

import numpy as np
import numpy.testing as npt
import pytest

from xpdrecon import cli, formats
from xpdrecon.phantom import make_phantom
from xpdrecon.physics import make_mask

README = Path(__file__).resolve().parents[1] / "README.md"

# install and test commands in the README; everything else gets executed
DEV_COMMANDS = ("pip ", "pytest", "python3 tests/")


def run(*argv):
    return cli.main([str(a) for a in argv])


def _blocks(lang):
    return re.findall(rf"```{lang}\n(.*?)```", README.read_text(), flags=re.S)


def _readme_commands():
    out = []
    for block in _blocks("bash"):
        for line in block.splitlines():
            line = line.split("  #", 1)[0].strip()
            if line:
                out.append(line)
    return out


# ----------------------------------------------------------------- pipeline

def test_pipeline_end_to_end(tmp_path):
    p = tmp_path
    t0 = time.perf_counter()
    assert run("phantom", "--size", 64, "--out", p / "truth.ksp") == 0
    assert run("mask", "--height", 64, "--accel", 4, "--acs", 16, "--out", p / "m.msk") == 0
    assert run("sim", "--image", p / "truth.ksp", "--coils", 4, "--mask", p / "m.msk",
               "--maps-out", p / "true.smp", "--out", p / "k.ksp") == 0
    assert run("maps", "--kspace", p / "k.ksp", "--mask", p / "m.msk", "--out", p / "est.smp") == 0
    assert run("recon-zf", "--kspace", p / "k.ksp", "--mask", p / "m.msk", "--out", p / "zf.ksp") == 0
    assert run("recon-pdhg", "--kspace", p / "k.ksp", "--mask", p / "m.msk", "--maps", p / "est.smp",
               "--trace-csv", p / "trace.csv", "--out", p / "cs.ksp") == 0
    assert run("eval", "--recon", p / "zf.ksp", "--target", p / "truth.ksp", "--out-csv", p / "zf.csv") == 0
    assert run("eval", "--recon", p / "cs.ksp", "--target", p / "truth.ksp", "--out-csv", p / "cs.csv",
               "--method", "pdhg", "--accel", 4) == 0
    assert time.perf_counter() - t0 < 60.0

    assert (p / "cs.pgm").exists() and (p / "zf.pgm").exists()
    assert formats.read_maps(p / "est.smp").shape == (4, 64, 64)
    rows = {}
    for name in ("zf", "cs"):
        with open(p / f"{name}.csv") as fh:
            rows[name] = next(csv.DictReader(fh))
    assert rows["cs"]["volume_id"] == "truth" and rows["cs"]["method"] == "pdhg"
    assert float(rows["cs"]["psnr_db"]) > float(rows["zf"]["psnr_db"]) + 3.0
    with open(p / "trace.csv") as fh:
        assert len(list(csv.reader(fh))) == 201


def test_sim_matches_library(tmp_path):
    from xpdrecon.phantom import make_coil_maps
    from xpdrecon.physics import ForwardOperator, apply_forward

    mask = make_mask(32, 32, 4, 8)
    formats.write_image(tmp_path / "x.ksp", make_phantom(32))
    formats.write_mask(tmp_path / "m.msk", mask)
    assert run("sim", "--image", tmp_path / "x.ksp", "--coils", 3, "--mask", tmp_path / "m.msk",
               "--out", tmp_path / "k.ksp") == 0
    expected = apply_forward(ForwardOperator(mask, make_coil_maps(32, 3)), make_phantom(32))
    npt.assert_array_equal(formats.read_kspace(tmp_path / "k.ksp").data[0], expected)


def test_sim_noise_is_seeded_and_masked(tmp_path):
    formats.write_image(tmp_path / "x.ksp", make_phantom(16))
    mask = make_mask(16, 16, 4, 4)
    formats.write_mask(tmp_path / "m.msk", mask)
    outs = []
    for i, seed in enumerate((5, 5, 6)):
        run("sim", "--image", tmp_path / "x.ksp", "--coils", 2, "--mask", tmp_path / "m.msk",
            "--noise-sigma", 0.01, "--seed", seed, "--out", tmp_path / f"k{i}.ksp")
        outs.append(formats.read_kspace(tmp_path / f"k{i}.ksp").data[0])
    npt.assert_array_equal(outs[0], outs[1])
    assert not np.array_equal(outs[0], outs[2])
    assert np.all(outs[0][:, ~mask.line_selected, :] == 0)


def test_full_sampling_zero_filled_is_exact(tmp_path):
    p = tmp_path
    run("phantom", "--size", 32, "--out", p / "truth.ksp")
    run("mask", "--height", 32, "--accel", 1, "--acs", 0, "--out", p / "m.msk")
    run("sim", "--image", p / "truth.ksp", "--coils", 4, "--mask", p / "m.msk", "--out", p / "k.ksp")
    assert run("recon-zf", "--kspace", p / "k.ksp", "--mask", p / "m.msk", "--out", p / "zf.ksp",
               "--pgm", p / "custom.pgm") == 0
    assert (p / "custom.pgm").exists()
    assert run("eval", "--recon", p / "zf.ksp", "--target", p / "truth.ksp", "--out-csv", p / "m.csv") == 0
    with open(p / "m.csv") as fh:
        row = next(csv.DictReader(fh))
    assert float(row["psnr_db"]) >= 80.0
    assert float(row["psnr_db"]) <= 100.0


def test_eval_prints_metrics(tmp_path, capsys):
    formats.write_image(tmp_path / "a.ksp", make_phantom(32))
    run("eval", "--recon", tmp_path / "a.ksp", "--target", tmp_path / "a.ksp", "--out-csv", tmp_path / "m.csv")
    out = capsys.readouterr().out
    assert "psnr_db=100.0000" in out and "ssim=1.000000" in out


# ----------------------------------------------------------------- exit codes

def test_invalid_acceleration_exits_2(tmp_path):
    assert run("mask", "--height", 32, "--accel", 0, "--out", tmp_path / "m.msk") == cli.EXIT_CONFIG
    assert not (tmp_path / "m.msk").exists()


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        run("phantom", "--size", 0, "--out", "x.ksp")
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        run("gradcheck", "--module", "nope")
    assert exc.value.code == 2


def test_missing_file_exits_3(tmp_path):
    code = run("recon-zf", "--kspace", tmp_path / "absent.ksp", "--mask", tmp_path / "absent.msk",
               "--out", tmp_path / "o.ksp")
    assert code == cli.EXIT_DATA


@pytest.mark.parametrize("damage", ["magic", "truncate"])
def test_corrupt_file_exits_3(tmp_path, damage):
    formats.write_image(tmp_path / "x.ksp", make_phantom(16))
    formats.write_mask(tmp_path / "m.msk", make_mask(16, 16, 4, 4))
    raw = (tmp_path / "m.msk").read_bytes()
    raw = b"XXXX" + raw[4:] if damage == "magic" else raw[:-3]
    (tmp_path / "m.msk").write_bytes(raw)
    code = run("sim", "--image", tmp_path / "x.ksp", "--coils", 2, "--mask", tmp_path / "m.msk",
               "--out", tmp_path / "k.ksp")
    assert code == cli.EXIT_DATA


def test_corrupt_checkpoint_exits_3(tmp_path):
    p = tmp_path
    formats.write_image(p / "x.ksp", make_phantom(16))
    formats.write_mask(p / "m.msk", make_mask(16, 16, 4, 4))
    run("sim", "--image", p / "x.ksp", "--coils", 2, "--mask", p / "m.msk", "--out", p / "k.ksp")
    (p / "bad.ckpt").write_bytes(b"CKPT\x01\x00\x00\x00garbage")
    code = run("recon-xpdnet", "--kspace", p / "k.ksp", "--mask", p / "m.msk", "--ckpt", p / "bad.ckpt",
               "--out", p / "o.ksp")
    assert code == cli.EXIT_DATA


def test_shape_mismatch_exits_2(tmp_path):
    formats.write_image(tmp_path / "x.ksp", make_phantom(16))
    formats.write_mask(tmp_path / "m.msk", make_mask(32, 32, 4, 4))
    code = run("sim", "--image", tmp_path / "x.ksp", "--coils", 2, "--mask", tmp_path / "m.msk",
               "--out", tmp_path / "k.ksp")
    assert code == cli.EXIT_CONFIG


def test_bad_train_config_exits_2(tmp_path):
    (tmp_path / "c.cfg").write_text("acceleration = 0\n")
    assert run("train", "--config", tmp_path / "c.cfg", "--out-ckpt", tmp_path / "c.ckpt") == cli.EXIT_CONFIG
    (tmp_path / "c.cfg").write_text("no_such_key = 1\n")
    assert run("train", "--config", tmp_path / "c.cfg", "--out-ckpt", tmp_path / "c.ckpt") == cli.EXIT_CONFIG


def test_gradcheck_conv(capsys):
    assert run("gradcheck", "--module", "conv") == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3 and all(line.startswith("PASS conv:") for line in lines)


def test_gradcheck_failure_exits_4(monkeypatch):
    from xpdrecon import checks

    monkeypatch.setitem(checks.SUITES, "conv", lambda: [checks.CheckLine("conv", "w", 1.0, 1e-4)])
    assert run("gradcheck", "--module", "conv") == cli.EXIT_NUMERIC


# ----------------------------------------------------------------- README

def test_readme_has_examples():
    commands = _readme_commands()
    assert sum(c.startswith("xpdrecon ") for c in commands) >= 10
    assert all(c.startswith(("xpdrecon ",) + DEV_COMMANDS) for c in commands), commands


def test_readme_cli_examples(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for block in _blocks("ini"):
        first, _, body = block.partition("\n")
        Path(first.lstrip("# ").strip()).write_text(body)
    for line in _readme_commands():
        if line.startswith(DEV_COMMANDS):
            continue
        argv = shlex.split(line)
        assert cli.main(argv[1:]) == 0, line
    for name in ("cs.ksp", "cs.pgm", "trace.csv", "metrics.csv", "tiny.ckpt", "loss.csv", "net.ksp", "net.pgm"):
        assert (tmp_path / name).exists(), name


@pytest.mark.parametrize("index", range(2))
def test_readme_python_examples(index, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    blocks = _blocks("python")
    assert len(blocks) == 2
    exec(compile(blocks[index], f"README-python-{index}", "exec"), {})
