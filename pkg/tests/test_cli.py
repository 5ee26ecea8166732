import json
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from inna_lab.cli import RunConfig, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_bounds(capsys):
    code, out, _ = run_cli(capsys, "bounds", "--alpha", "2", "--beta", "0.1", "--lipschitz", "4")
    assert code == 0
    d = json.loads(out)
    assert d["gamma_convergence"] == pytest.approx(0.2)
    assert d["spiral_interval"] == pytest.approx([1.1145618, 358.8854382])
    code, out, _ = run_cli(capsys, "bounds", "--alpha", "2", "--beta", "1", "--lipschitz", "4")
    d = json.loads(out)
    assert d["gamma_diffeo"] == pytest.approx(0.19098, abs=1e-5)
    assert d["spiral_interval"] is None


def test_bad_flags_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bounds", "--alpha", "2", "--beta", "0.1"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err
    code, _, err = run_cli(capsys, "bounds", "--alpha", "2", "--beta", "0", "--lipschitz", "4")
    assert code == 2 and "error" in err


def test_classify(capsys):
    code, out, _ = run_cli(capsys, "classify", "--landscape", "doublewell", "--alpha", "2", "--beta", "0.1", "--gamma", "0.02")
    assert code == 0
    d = json.loads(out)
    assert d["critical"]["label"] == "StrictSaddle"
    code, out, _ = run_cli(capsys, "classify", "--landscape", "quad2", "--theta0", "1,1", "--alpha", "2", "--beta", "0.1")
    assert code == 2 and out == ""


def test_run_quad2(capsys, tmp_path):
    code, out, err = run_cli(
        capsys, "run", "--landscape", "quad2", "--alpha", "2", "--beta", "0.1", "--gamma", "0.15",
        "--theta0", "1,1", "--out", str(tmp_path),
    )
    assert code == 0 and err == ""
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["terminated_by"] == "GradTol"
    assert max(abs(x) for x in summary["final_theta"]) < 1e-8
    assert summary["stationary"]["in_S"]
    header = (tmp_path / "trajectory.csv").read_text().splitlines()[0]
    assert header == "iter,theta_0,theta_1,psi_0,psi_1,loss,grad_norm,lyapunov,coupling_residual"


def test_run_gd_on_stable_manifold(capsys, tmp_path):
    code, _, _ = run_cli(capsys, "run", "--landscape", "doublewell", "--algorithm", "gd", "--theta0", "0,1", "--out", str(tmp_path))
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["final_theta"][0] == 0.0
    assert summary["critical_class"] == "StrictSaddle"
    assert summary["stationary"]["in_S_neg"]


def test_run_diverges_with_exit_4(capsys, tmp_path):
    code, _, err = run_cli(capsys, "run", "--landscape", "quad2", "--gamma", "10", "--out", str(tmp_path))
    assert code == 4
    assert "warning" in err and "diverged" in err


def test_run_max_iter_exit_3(capsys, tmp_path):
    code, _, _ = run_cli(capsys, "run", "--max-iter", "3", "--gamma", "0.01", "--out", str(tmp_path))
    assert code == 3


@pytest.mark.parametrize("algo", ["din", "inna_vanishing"])
def test_run_other_algorithms(capsys, tmp_path, algo):
    extra = ["--gamma", "0.05"] if algo == "inna_vanishing" else ["--t-end", "40"]
    code, _, _ = run_cli(capsys, "run", "--algorithm", algo, "--out", str(tmp_path), *extra)
    assert code == 0
    assert json.loads((tmp_path / "summary.json").read_text())["terminated_by"] == "GradTol"


def test_config_file_with_flag_override(capsys, tmp_path):
    cfg = RunConfig(landscape="quad2", alpha=2.0, beta=1.0, gamma=0.1, max_iter=4, out=str(tmp_path / "a"))
    path = tmp_path / "cfg.json"
    path.write_text(cfg.dumps())
    code, _, _ = run_cli(capsys, "run", "--config", str(path))
    assert code == 3
    code, _, _ = run_cli(capsys, "run", "--config", str(path), "--max-iter", "100000", "--out", str(tmp_path / "b"))
    assert code == 0
    summary = json.loads((tmp_path / "b" / "summary.json").read_text())
    assert summary["config"]["beta"] == 1.0 and summary["config"]["max_iter"] == 100000


def test_bad_config_exit_2(capsys, tmp_path):
    path = tmp_path / "cfg.json"
    for text in ("{", '{"nope": 1}', '{"alpha": null}', '{"landscape": "x"}', "[]"):
        path.write_text(text)
        code, _, err = run_cli(capsys, "run", "--config", str(path), "--out", str(tmp_path / "o"))
        assert code == 2, text
        assert err.startswith("error")
    code, _, _ = run_cli(capsys, "run", "--config", str(tmp_path / "missing.json"))
    assert code == 2


@given(
    st.sampled_from(["quad2", "doublewell", "fig1_min"]),
    st.floats(0, 5),
    st.floats(0.01, 3),
    st.one_of(st.none(), st.floats(1e-4, 1)),
    st.lists(st.floats(-10, 10), min_size=2, max_size=2),
    st.sampled_from(["inna", "din", "gd", "inna_vanishing"]),
    st.integers(1, 10**6),
)
def test_config_round_trip(landscape, a, b, g, theta0, algo, max_iter):
    cfg = RunConfig(landscape=landscape, alpha=a, beta=b, gamma=g, theta0=theta0, algorithm=algo, max_iter=max_iter)
    text = cfg.dumps()
    again = RunConfig.loads(text)
    assert again == cfg
    assert again.dumps() == text


def test_outputs_stay_under_out(capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    out = tmp_path / "deep" / "dir"
    code, _, _ = run_cli(capsys, "reproduce", "spiral", "--out", str(out))
    assert code == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["deep"]
    assert len(list(out.glob("spiral_alpha*.csv"))) == 4


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "inna_lab", "bounds", "--alpha", "2", "--beta", "0.1", "--lipschitz", "4"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["gamma_diffeo"] == 0.1
