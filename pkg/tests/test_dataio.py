import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gclab.dataio import (
    PreprocessedDataset,
    TemperatureDataset,
    load_weather,
    preprocess,
    sample_domain,
    sv_pairs,
    synth_quadratic,
    synthesize_weather,
    target_sv,
    write_weather,
)
from gclab.errors import DataParseError, IngestionError, InvalidInputError, NoNextDayError, OutOfRangeError

from _support import random_connected_graph


def write_toy(tmp_path, rows, stations=(("A", 48.4, -4.5), ("B", 48.5, -4.4))):
    (tmp_path / "stations.csv").write_text(
        "station,lat,lon\n" + "".join(f"{s},{la},{lo}\n" for s, la, lo in stations)
    )
    (tmp_path / "temperatures.csv").write_text("station,day,hour,temp_c\n" + "".join(r + "\n" for r in rows))
    return tmp_path


TOY = ["A,1,0,5.0", "A,1,1,6.5", "B,1,0,4.0", "B,1,1,7.25"]


class TestLoad:
    def test_toy_file(self, tmp_path):
        ds = load_weather(write_toy(tmp_path, TOY))
        assert ds.values.shape == (2, 2, 1)
        np.testing.assert_array_equal(ds.values[:, :, 0], [[5.0, 6.5], [4.0, 7.25]])
        assert ds.stations == ("A", "B")
        assert (ds.N, ds.D) == (2, 1)

    def test_file_path_and_explicit_stations(self, tmp_path):
        d = write_toy(tmp_path, TOY)
        ds = load_weather(d / "temperatures.csv", d / "stations.csv")
        assert ds.values.shape == (2, 2, 1)

    def test_missing_cell(self, tmp_path):
        with pytest.raises(IngestionError) as info:
            load_weather(write_toy(tmp_path, TOY[:-1]))
        assert info.value.missing == [("B", 1, 1)]
        assert "B" in str(info.value)

    def test_blank_value_is_missing(self, tmp_path):
        with pytest.raises(IngestionError) as info:
            load_weather(write_toy(tmp_path, TOY[:-1] + ["B,1,1,"]))
        assert info.value.missing == [("B", 1, 1)]

    @pytest.mark.parametrize(
        "bad,line",
        [("A,1,0", 3), ("A,x,0,1.0", 3), ("A,1,0,warm", 3), ("C,1,0,1.0", 3), ("A,1,0,5.0", 3)],
    )
    def test_parse_errors(self, tmp_path, bad, line):
        rows = [TOY[0], bad] + TOY[1:]
        with pytest.raises(DataParseError) as info:
            load_weather(write_toy(tmp_path, rows))
        assert info.value.line == line

    def test_bad_header(self, tmp_path):
        d = write_toy(tmp_path, TOY)
        (d / "temperatures.csv").write_text("station,day,temp\nA,1,1\n")
        with pytest.raises(DataParseError) as info:
            load_weather(d)
        assert info.value.line == 1

    def test_synthetic_round_trip(self, tmp_path):
        ds = synthesize_weather(seed=3)
        assert ds.values.shape == (32, 24, 31)
        write_weather(ds, tmp_path)
        back = load_weather(tmp_path)
        np.testing.assert_array_equal(back.values, ds.values)
        np.testing.assert_array_equal(back.station_coords, ds.station_coords)
        assert back.stations == ds.stations and back.days == ds.days and back.hours == ds.hours

    def test_station_projection(self):
        ds = TemperatureDataset(np.zeros((2, 1, 1)), np.array([[48.0, -4.0], [49.0, -4.0]]), ("a", "b"), (0,), (1,))
        xy = ds.station_xy()
        np.testing.assert_allclose(xy[1, 1] - xy[0, 1], 6371 * np.pi / 180, rtol=1e-12)
        np.testing.assert_allclose(xy[:, 0], 0, atol=1e-12)


class TestPreprocess:
    def test_constant_dataset(self):
        ds = TemperatureDataset(np.full((3, 24, 4), 7.0), np.zeros((3, 2)), ("a", "b", "c"), tuple(range(24)), (1, 2, 3, 4))
        for B in (None, 0.01, 10.35):
            np.testing.assert_array_equal(preprocess(ds, B).values, 0)

    def test_reference_scale(self):
        ds = synthesize_weather(seed=0)
        pds = preprocess(ds, B=10.35)
        assert pds.B == 10.35
        assert np.abs(pds.values).max() <= 1

    def test_auto_scale(self):
        pds = preprocess(synthesize_weather(seed=1))
        assert np.abs(pds.values).max() == 1.0

    def test_round_trip(self):
        ds = synthesize_weather(seed=2)
        np.testing.assert_allclose(preprocess(ds).unpreprocess(), ds.values, atol=1e-10)
        np.testing.assert_allclose(preprocess(ds, hours_divisor=23, B=30).unpreprocess(), ds.values, atol=1e-10)

    def test_average_divisor(self):
        ds = synthesize_weather(n_stations=4, days=3, seed=4)
        total = ds.values.sum(axis=(1, 2))
        np.testing.assert_allclose(preprocess(ds).x_ave, total / (24 * 3))
        np.testing.assert_allclose(preprocess(ds, B=50, hours_divisor=23).x_ave, total / (23 * 3))

    def test_scale_too_small(self):
        with pytest.raises(OutOfRangeError):
            preprocess(synthesize_weather(seed=5), B=0.5)

    def test_invalid_arguments(self):
        ds = synthesize_weather(n_stations=3, days=2)
        with pytest.raises(InvalidInputError):
            preprocess(ds, B=-1)
        with pytest.raises(InvalidInputError):
            preprocess(ds, hours_divisor=0)


def _pds(values):
    values = np.asarray(values, dtype=float)
    N, H, D = values.shape
    return PreprocessedDataset(values, np.zeros(N), 1.0, tuple(range(H)), tuple(range(1, D + 1)))


class TestTargetSv:
    def test_zero_next_day(self):
        v = np.zeros((4, 2, 2))
        v[:, :, 0] = 0.3
        assert target_sv(_pds(v), 1, 0) == 0

    def test_constant_next_day(self):
        c, N = 0.4, 5
        v = np.zeros((N, 1, 2))
        v[:, :, 1] = c
        assert target_sv(_pds(v), 1, 0) == pytest.approx(N * c**2 - c**2, abs=1e-15)

    def test_componentwise(self):
        rng = np.random.default_rng(6)
        pds = _pds(rng.uniform(-1, 1, (7, 3, 4)))
        for d in (1, 2, 3):
            for i in range(3):
                x = pds.values[:, i, d]
                expected = sum(t * t for t in x) - (sum(x) / len(x)) ** 2
                assert target_sv(pds, d, i) == pytest.approx(expected, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 12), st.integers(0, 10**6))
    def test_nonnegative(self, N, seed):
        # mean^2 <= ||x||^2 / N <= ||x||^2, so the verbatim formula never goes negative
        pds = _pds(np.random.default_rng(seed).uniform(-1, 1, (N, 1, 2)))
        assert target_sv(pds, 1, 0) >= 0

    def test_last_day(self):
        pds = _pds(np.zeros((2, 1, 3)))
        with pytest.raises(NoNextDayError):
            target_sv(pds, 3, 0)
        with pytest.raises(InvalidInputError):
            target_sv(pds, 0, 0)

    def test_pairs(self):
        pds = preprocess(synthesize_weather(seed=7))
        X, y = sv_pairs(pds, [1, 6, 11, 16, 21, 26])
        assert X.shape == (144, 32) and y.shape == (144,)
        np.testing.assert_array_equal(X[25], pds.signal(6, 1))
        assert y[25] == target_sv(pds, 6, 1)


class TestSynthQuadratic:
    @pytest.fixture
    def graph(self):
        return random_connected_graph(np.random.default_rng(8), 10)

    def test_zero_and_even(self, graph):
        f, _ = synth_quadratic(graph, seed=1)
        assert f(np.zeros(10)) == 0
        X = np.random.default_rng(9).uniform(-1, 1, (20, 10))
        np.testing.assert_array_equal(f(-X), f(X))

    def test_support(self, graph):
        _, Bq = synth_quadratic(graph, seed=2)
        support = Bq != 0
        expected = (graph.weights != 0) | np.eye(10, dtype=bool)
        np.testing.assert_array_equal(support, expected)
        assert np.abs(Bq).max() <= 1

    def test_formula_and_determinism(self, graph):
        f, Bq = synth_quadratic(graph, seed=3)
        f2, Bq2 = synth_quadratic(graph, seed=3)
        np.testing.assert_array_equal(Bq, Bq2)
        x = np.random.default_rng(10).uniform(-1, 1, 10)
        assert f(x) == pytest.approx(np.sum((Bq @ x) ** 2))


class TestSampleDomain:
    def test_range(self):
        X = sample_domain(5, 1000, seed=0)
        assert X.shape == (1000, 5)
        assert np.abs(X).max() <= 1

    def test_mean(self):
        X = sample_domain(4, 10_000, seed=1)
        assert np.abs(X.mean(axis=0)).max() <= 4 / np.sqrt(10_000)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_reproducible(self, seed):
        np.testing.assert_array_equal(sample_domain(3, 7, seed), sample_domain(3, 7, seed))

    def test_invalid(self):
        with pytest.raises(InvalidInputError):
            sample_domain(3, 0)
