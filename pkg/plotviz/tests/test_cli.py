import shutil
import subprocess

import pytest

from conftest import record_criterion
from plotviz.cli import main

PANELS = ("fig_a", "fig_b", "fig_c", "fig_d")


@pytest.fixture(scope="module")
def trace_root(tmp_path_factory):
    """Four real experiment trace sets produced by the solver CLI."""
    if shutil.which("dataenrich") is None:
        pytest.skip("dataenrich CLI not installed")
    root = tmp_path_factory.mktemp("traces")
    for name in PANELS:
        iters = "60" if name == "fig_d" else "300"
        proc = subprocess.run(
            ["dataenrich", "experiment", "--name", name, "--reps", "2",
             "--iters", iters, "--seed", "5", "--threads", "2",
             "--out", str(root / name)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
    return root


def test_criterion_9_panel_figure(trace_root, tmp_path, capsys):
    out = tmp_path / "figure1.png"
    rc = main(["--in", str(trace_root), "--panels", ",".join(PANELS),
               "--out", str(out)])
    assert rc == 0
    assert "wrote" in capsys.readouterr().out
    first = out.read_bytes()
    assert first.startswith(b"\x89PNG")

    rc2 = main(["--in", str(trace_root), "--panels", ",".join(PANELS),
                "--out", str(out)])
    capsys.readouterr()
    assert rc2 == 0
    identical = out.read_bytes() == first
    record_criterion(
        "criterion 9 (panel rendering)",
        identical,
        f"2x2 log-scale figure from the four experiment trace sets, "
        f"{len(first)} bytes, rerun byte-identical: {identical}",
    )
    assert identical


def test_render_subprocess_reproducible(trace_root, tmp_path):
    outs = []
    for name in ("r1.png", "r2.png"):
        out = tmp_path / name
        proc = subprocess.run(
            ["render", "--in", str(trace_root), "--panels",
             "fig_a,fig_b", "--out", str(out)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_noisy_group_plateaus_above_rest(trace_root):
    from plotviz import read_trace

    panel = read_trace(trace_root / "fig_b" / "trace_avg.csv", name="fig_b")
    finals = panel.block_errors[-1]
    noisy = finals[list(panel.block_ids).index(1)]
    rest = [v for g, v in zip(panel.block_ids, finals) if g != 1]
    assert noisy > max(rest)


def test_malformed_csv_exit_code(trace_root, tmp_path, capsys):
    broken = tmp_path / "in"
    shutil.copytree(trace_root / "fig_a", broken / "fig_a")
    target = broken / "fig_a" / "trace_avg.csv"
    lines = target.read_text().splitlines()
    lines[5] = lines[5] + ",0.0"
    target.write_text("\n".join(lines) + "\n")
    rc = main(["--in", str(broken), "--panels", "fig_a",
               "--out", str(tmp_path / "x.png")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "[render:input]" in err
    assert "trace_avg.csv" in err and "row 6" in err
    assert not (tmp_path / "x.png").exists()


def test_missing_panel_exit_code(trace_root, tmp_path, capsys):
    rc = main(["--in", str(trace_root), "--panels", "fig_a,fig_z",
               "--out", str(tmp_path / "x.png")])
    assert rc == 1
    assert "[render:input]" in capsys.readouterr().err


def test_linear_and_grid_flags(trace_root, tmp_path, capsys):
    out = tmp_path / "lin.png"
    rc = main(["--in", str(trace_root), "--panels", "fig_a,fig_b",
               "--linear", "--grid", "1x2", "--out", str(out)])
    assert rc == 0
    capsys.readouterr()
    assert out.is_file()


def test_grid_too_small(trace_root, tmp_path, capsys):
    rc = main(["--in", str(trace_root), "--panels", "fig_a,fig_b",
               "--grid", "1x1", "--out", str(tmp_path / "x.png")])
    assert rc == 1
    assert "[render:input]" in capsys.readouterr().err


def test_help_exit_zero(capsys):
    assert main(["--help"]) == 0
    capsys.readouterr()
