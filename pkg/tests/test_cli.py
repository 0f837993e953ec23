import csv
import subprocess
import sys

import numpy as np
import pytest

from intermittent_es import cli
from intermittent_es import config as cfgmod
from intermittent_es.engine import simulate


def preset_file(tmp_path, name, **overrides):
    """Write a copy of a bundled preset with ``section.key`` values replaced or added."""
    lines = cfgmod.preset_text(name).splitlines()
    for key, value in overrides.items():
        section, k = key.split(".")
        head = lines.index(f"[{section}]")
        stop = next((i for i in range(head + 1, len(lines)) if lines[i].startswith("[")), len(lines))
        body = [ln for ln in lines[head + 1:stop] if not ln.startswith(f"{k} =")]
        lines = lines[:head + 1] + [f"{k} = {value}"] + body + lines[stop:]
    p = tmp_path / f"{name}.toml"
    p.write_text("\n".join(lines) + "\n")
    return p


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


class TestRun:
    def test_first_row_and_columns(self, tmp_path, capsys):
        cfg = preset_file(tmp_path, "fig2b", **{"engine.t_end": "3.0"})
        out = tmp_path / "o.csv"
        assert cli.main(["run", str(cfg), "--out", str(out)]) == 0
        header, rows = read_csv(out)
        assert header == ["t", "x_1", "h_m", "tau", "alpha", "phase", "g_1"]
        assert float(rows[0][0]) == 0.0 and float(rows[0][1]) == -1.0
        assert float(rows[-1][0]) == 3.0
        assert "fig2b" in capsys.readouterr().out

    def test_round_trip_is_exact(self, tmp_path):
        cfg = preset_file(tmp_path, "fig4a", **{"engine.t_end": "2.5"})
        out = tmp_path / "o.csv"
        assert cli.main(["run", str(cfg), "--out", str(out)]) == 0
        spec = cfgmod.load(cfg)
        traj = simulate(spec.scheme, spec.sched, spec.cost, spec.eng, spec.x0)
        _, rows = read_csv(out)
        arr = np.array([[float(v) for i, v in enumerate(r) if i != 5] for r in rows])
        assert np.array_equal(arr[:, 0], traj.t)
        assert np.array_equal(arr[:, 1], traj.x[:, 0])
        assert np.array_equal(arr[:, 2], traj.h_m)
        assert np.array_equal(arr[:, 3], traj.tau)
        assert np.array_equal(arr[:, 4], traj.alpha)
        assert np.array_equal(arr[:, 5], traj.g_held[:, 0])
        assert [r[5] for r in rows] == traj.phase_names()

    def test_divergence_exit(self, tmp_path, capsys):
        out = tmp_path / "o.csv"
        assert cli.main(["run", "fig2c", "--out", str(out)]) == cli.EXIT_DIVERGED
        _, rows = read_csv(out)
        assert float(rows[-1][0]) < 4.0 and float(rows[-1][1]) < -10.0
        assert "diverged" in capsys.readouterr().err

    def test_pulse_too_long(self, tmp_path, capsys):
        cfg = preset_file(tmp_path, "fig2b", **{"measurement.eps": "1.5"})
        assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o.csv")]) == cli.EXIT_CONFIG
        err = capsys.readouterr().err
        assert "0 < eps <= T_s" in err and "fig2b.toml:" in err

    def test_unknown_key(self, tmp_path, capsys):
        cfg = preset_file(tmp_path, "fig2b", **{"scheme.speed": "3"})
        assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o.csv")]) == cli.EXIT_CONFIG
        assert "scheme.speed: unknown key" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert cli.main(["run", str(tmp_path / "none.toml"), "--out", str(tmp_path / "o.csv")]) == cli.EXIT_CONFIG

    def test_usage_error(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["run", "fig2b"])
        assert info.value.code == cli.EXIT_CONFIG

    def test_svg_plot(self, tmp_path):
        cfg = preset_file(tmp_path, "fig3a", **{"engine.t_end": "3.0"})
        svg = tmp_path / "p.svg"
        assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o.csv"), "--plot", str(svg)]) == 0
        text = svg.read_text()
        assert text.startswith("<svg") and text.rstrip().endswith("</svg>")
        assert "<polyline" in text and "stroke-dasharray" in text and ">fig3a<" in text

    def test_deterministic_csv(self, tmp_path):
        cfg = preset_file(tmp_path, "fig5b", **{"engine.t_end": "3.0"})
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        cli.main(["run", str(cfg), "--out", str(a)])
        cli.main(["run", str(cfg), "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()


class TestSweep:
    def test_grid(self, tmp_path, capsys):
        cfg = preset_file(tmp_path, "fig2b", **{"engine.t_end": "4.0", "engine.blowup": "12.0",
                                                 "engine.sample_stride": "50"})
        out = tmp_path / "s.csv"
        code = cli.main(["sweep", str(cfg), "--grid", "scheme.omega=62.83,6289.38",
                         "measurement.eps=0.1,0.17", "--out", str(out)])
        assert code == 0
        header, rows = read_csv(out)
        assert len(rows) == 4
        assert header == ["scheme.omega", "measurement.eps", "steady_state_error", "convergence_time",
                          "diverged", "max_excursion", "samples"]
        assert [r[4] for r in rows] == ["false", "true", "false", "false"]
        assert "1 diverged" in capsys.readouterr().out

    def test_empty_grid(self, tmp_path):
        cfg = preset_file(tmp_path, "fig2b", **{"engine.t_end": "1.0"})
        out = tmp_path / "s.csv"
        assert cli.main(["sweep", str(cfg), "--out", str(out)]) == 0
        assert len(read_csv(out)[1]) == 1

    def test_bad_key(self, tmp_path, capsys):
        out = tmp_path / "s.csv"
        assert cli.main(["sweep", "fig2b", "--grid", "scheme.speed=1,2", "--out", str(out)]) == cli.EXIT_CONFIG
        assert not out.exists()


class TestVerify:
    def test_gamma(self, capsys):
        assert cli.main(["verify", "--suite", "gamma"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_path_equivalence(self, capsys):
        assert cli.main(["verify", "--suite", "path-equivalence"]) == 0

    def test_unknown_suite(self, capsys):
        assert cli.main(["verify", "--suite", "nope"]) == cli.EXIT_CONFIG


def test_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "intermittent_es.cli", "run", "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "[scheme]" in res.stdout and "fig2b" in res.stdout
