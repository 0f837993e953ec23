import pytest

from intermittent_es import config as cfgmod
from intermittent_es import sweep as sw
from intermittent_es.checks import ConfigurationError


def base(t_end=4.0):
    data, text, source = cfgmod.resolve("fig2b")
    data = cfgmod.with_override(data, "engine.t_end", t_end)
    data = cfgmod.with_override(data, "engine.blowup", 12.0)
    return cfgmod.with_override(data, "engine.sample_stride", 20), text, source


class TestGrid:
    def test_parse(self):
        grid = sw.parse_grid(["scheme.omega=62.83,6289.38", "measurement.eps=0.1,0.17"])
        assert grid == [("scheme.omega", [62.83, 6289.38]), ("measurement.eps", [0.1, 0.17])]

    @pytest.mark.parametrize("items", [["scheme.speed=1,2"], ["omega=1"], ["scheme.omega"], ["scheme.omega="],
                                       ["scheme.omega=1", "scheme.omega=2"]])
    def test_invalid(self, items):
        with pytest.raises(ConfigurationError):
            sw.parse_grid(items)

    def test_bad_cell_fails_before_any_run(self, monkeypatch):
        calls = []
        monkeypatch.setattr(sw, "run_cell", lambda spec: calls.append(spec))
        data, text, source = base()
        with pytest.raises(ConfigurationError, match="grid cell"):
            sw.sweep(data, sw.parse_grid(["measurement.eps=0.1,1.5"]), text, source)
        assert calls == []

    def test_lexicographic_order(self):
        data, text, source = base()
        cells = sw.build_cells(data, sw.parse_grid(["scheme.omega=62.83,6289.38", "measurement.eps=0.1,0.17"]),
                               text, source)
        assert [tuple(p.values()) for p, _ in cells] == [(62.83, 0.1), (62.83, 0.17), (6289.38, 0.1), (6289.38, 0.17)]


class TestSweep:
    def test_four_cells_with_divergence(self):
        data, text, source = base()
        grid = sw.parse_grid(["scheme.omega=62.83185307179586,6289.468492486766", "measurement.eps=0.1,0.17"])
        rows = sw.sweep(data, grid, text, source, threads=2)
        assert len(rows) == 4
        flags = [r.metrics.diverged for r in rows]
        # slow dither with the long pulse is the only divergent cell
        assert flags == [False, True, False, False]
        header, table = sw.rows_to_table(grid, rows)
        assert header[:2] == ["scheme.omega", "measurement.eps"] and len(table) == 4
        assert table[1][header.index("diverged")] == "true"

    def test_empty_grid(self):
        data, text, source = base(2.0)
        rows = sw.sweep(data, [], text, source)
        assert len(rows) == 1 and rows[0].params == {}

    def test_thread_results_match_serial(self):
        data, text, source = base(2.0)
        grid = sw.parse_grid(["fields.kind=affine,trig", "measurement.eps=0.1,0.17"])
        serial = sw.sweep(data, grid, text, source, threads=1)
        threaded = sw.sweep(data, grid, text, source, threads=4)
        assert [r.metrics for r in serial] == [r.metrics for r in threaded]

    def test_thread_env(self, monkeypatch):
        monkeypatch.setenv(sw.THREADS_ENV, "3")
        assert sw.thread_count(10) == 3 and sw.thread_count(2) == 2
        monkeypatch.setenv(sw.THREADS_ENV, "zero")
        with pytest.raises(ConfigurationError):
            sw.thread_count(4)
        monkeypatch.setenv(sw.THREADS_ENV, "0")
        with pytest.raises(ConfigurationError):
            sw.thread_count(4)
