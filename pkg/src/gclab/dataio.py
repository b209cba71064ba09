"""Weather data ingestion, preprocessing and synthetic targets.

On-disk format: ``temperatures.csv`` with header ``station,day,hour,temp_c``
and a sidecar ``stations.csv`` with header ``station,lat,lon`` in the same
directory. Days are 1-based, hours 0-based.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataParseError, IngestionError, InvalidInputError, NoNextDayError, OutOfRangeError
from .graph_core import Graph

TEMPERATURE_FILE = "temperatures.csv"
STATIONS_FILE = "stations.csv"
EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class TemperatureDataset:
    """Temperatures in degrees Celsius, shape ``(N, hours, days)``."""

    values: np.ndarray
    station_coords: np.ndarray
    stations: tuple
    hours: tuple
    days: tuple

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def D(self) -> int:
        return self.values.shape[2]

    def station_xy(self) -> np.ndarray:
        """Equirectangular projection of ``(lat, lon)`` to kilometres."""
        lat = np.radians(self.station_coords[:, 0])
        lon = np.radians(self.station_coords[:, 1])
        x = EARTH_RADIUS_KM * (lon - lon.mean()) * np.cos(lat.mean())
        y = EARTH_RADIUS_KM * (lat - lat.mean())
        return np.column_stack([x, y])


def _read_csv(path: Path, header: list[str]):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise DataParseError(f"{path}: empty file", line=1) from None
        if [h.strip() for h in first] != header:
            raise DataParseError(f"{path}: expected header {','.join(header)}", line=1)
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            yield reader.line_num, row


def load_weather(path, stations_path=None) -> TemperatureDataset:
    """Read a temperature CSV (or a directory holding both files)."""
    path = Path(path)
    if path.is_dir():
        path = path / TEMPERATURE_FILE
    stations_path = Path(stations_path) if stations_path else path.parent / STATIONS_FILE

    stations, coords = [], []
    for line, row in _read_csv(stations_path, ["station", "lat", "lon"]):
        if len(row) != 3:
            raise DataParseError(f"{stations_path}:{line}: expected 3 fields", line=line)
        try:
            coords.append((float(row[1]), float(row[2])))
        except ValueError:
            raise DataParseError(f"{stations_path}:{line}: malformed coordinates", line=line) from None
        stations.append(row[0].strip())
    if len(set(stations)) != len(stations):
        raise DataParseError(f"{stations_path}: duplicate station ids")
    index = {s: k for k, s in enumerate(stations)}

    cells = {}
    for line, row in _read_csv(path, ["station", "day", "hour", "temp_c"]):
        if len(row) != 4:
            raise DataParseError(f"{path}:{line}: expected 4 fields", line=line)
        station = row[0].strip()
        if station not in index:
            raise DataParseError(f"{path}:{line}: unknown station {station!r}", line=line)
        try:
            day, hour = int(row[1]), int(row[2])
        except ValueError:
            raise DataParseError(f"{path}:{line}: malformed day/hour", line=line) from None
        raw = row[3].strip()
        if raw == "":
            cells.setdefault((station, day, hour), None)
            continue
        try:
            temp = float(raw)
        except ValueError:
            raise DataParseError(f"{path}:{line}: malformed temperature {raw!r}", line=line) from None
        if not math.isfinite(temp):
            cells.setdefault((station, day, hour), None)
            continue
        if cells.get((station, day, hour)) is not None:
            raise DataParseError(f"{path}:{line}: duplicate cell {(station, day, hour)}", line=line)
        cells[(station, day, hour)] = temp

    days = tuple(sorted({d for _, d, _ in cells}))
    hours = tuple(sorted({h for _, _, h in cells}))
    values = np.empty((len(stations), len(hours), len(days)))
    missing = []
    for s in stations:
        for d_i, d in enumerate(days):
            for h_i, h in enumerate(hours):
                v = cells.get((s, d, h))
                if v is None:
                    missing.append((s, d, h))
                else:
                    values[index[s], h_i, d_i] = v
    if missing:
        shown = ", ".join(map(str, missing[:10]))
        raise IngestionError(f"{len(missing)} missing cells (station, day, hour): {shown}", missing)
    values.setflags(write=False)
    return TemperatureDataset(values, np.array(coords), tuple(stations), hours, days)


def write_weather(ds: TemperatureDataset, directory) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tpath, spath = directory / TEMPERATURE_FILE, directory / STATIONS_FILE
    with open(spath, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["station", "lat", "lon"])
        for s, (lat, lon) in zip(ds.stations, ds.station_coords):
            w.writerow([s, repr(float(lat)), repr(float(lon))])
    with open(tpath, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["station", "day", "hour", "temp_c"])
        for k, s in enumerate(ds.stations):
            for d_i, d in enumerate(ds.days):
                for h_i, h in enumerate(ds.hours):
                    w.writerow([s, d, h, repr(float(ds.values[k, h_i, d_i]))])
    return tpath, spath


def synthesize_weather(n_stations: int = 32, days: int = 31, seed: int = 0) -> TemperatureDataset:
    """Synthetic January temperatures for stations scattered around Brest.

    Daily mean follows a slow random walk around 8 C; each day adds a
    diurnal sinusoid; station offsets and hourly noise are spatially
    correlated through a squared-exponential kernel with a 15 km length scale.
    """
    rng = np.random.default_rng(seed)
    lat = 48.39 + rng.uniform(-0.35, 0.35, n_stations)
    lon = -4.49 + rng.uniform(-0.55, 0.55, n_stations)
    coords = np.column_stack([lat, lon])
    ds0 = TemperatureDataset(np.zeros((n_stations, 1, 1)), coords, (), (0,), (1,))
    xy = ds0.station_xy()
    d2 = ((xy[:, None, :] - xy[None, :, :]) ** 2).sum(-1)
    K = np.exp(-d2 / (2 * 15.0**2)) + 1e-6 * np.eye(n_stations)
    chol = np.linalg.cholesky(K)

    hours = np.arange(24)
    daily = 8.0 + np.cumsum(rng.normal(0, 1.2, days))
    amplitude = rng.uniform(1.5, 4.0, days)
    offset = 1.5 * chol @ rng.standard_normal(n_stations)
    diurnal = np.sin(2 * np.pi * (hours - 9) / 24)  # peak mid-afternoon
    values = (
        daily[None, None, :]
        + amplitude[None, None, :] * diurnal[None, :, None]
        + offset[:, None, None]
        + 0.8 * np.einsum("ij,jhd->ihd", chol, rng.standard_normal((n_stations, 24, days)))
    )
    values = np.round(values, 2)
    values.setflags(write=False)
    stations = tuple(f"S{k + 1:02d}" for k in range(n_stations))
    return TemperatureDataset(values, coords, stations, tuple(range(24)), tuple(range(1, days + 1)))


@dataclass(frozen=True)
class PreprocessedDataset:
    """Centered, rescaled signals ``(x_org - x_ave) / B`` of shape ``(N, hours, days)``."""

    values: np.ndarray
    x_ave: np.ndarray
    B: float
    hours: tuple
    days: tuple

    @property
    def D(self) -> int:
        return self.values.shape[2]

    def signal(self, d: int, i: int) -> np.ndarray:
        """Signal on day ``d`` (1-based position) at hour position ``i`` (0-based)."""
        if not 1 <= d <= self.D:
            raise InvalidInputError(f"day {d} out of range 1..{self.D}")
        return np.array(self.values[:, i, d - 1])

    def unpreprocess(self) -> np.ndarray:
        return self.values * self.B + self.x_ave[:, None, None]


def preprocess(ds: TemperatureDataset, B: float | None = None, hours_divisor: int | None = None) -> PreprocessedDataset:
    """Remove the per-station average and rescale into ``[-1, 1]``.

    The average divides the sum over all (hour, day) cells by
    ``hours_divisor * D``; ``hours_divisor`` defaults to the number of hour
    slots. Without ``B`` the scale is the largest absolute deviation.
    """
    H = ds.values.shape[1]
    divisor = H if hours_divisor is None else int(hours_divisor)
    if divisor < 1:
        raise InvalidInputError("hours_divisor must be positive")
    x_ave = ds.values.sum(axis=(1, 2)) / (divisor * ds.D)
    dev = ds.values - x_ave[:, None, None]
    if B is None:
        B = float(np.abs(dev).max())
        if B == 0:
            B = 1.0
    elif not B > 0:
        raise InvalidInputError("B must be positive")
    out = dev / B
    worst = float(np.abs(out).max())
    if worst > 1:
        raise OutOfRangeError(f"B={B} leaves entries of magnitude {worst:.4g} outside [-1, 1]")
    out.setflags(write=False)
    return PreprocessedDataset(out, x_ave, float(B), ds.hours, ds.days)


def target_sv(pds: PreprocessedDataset, d: int, i: int) -> float:
    """``||x_{d+1}(t_i)||^2 - mean(x_{d+1}(t_i))^2`` for the next day's signal."""
    if d == pds.D:
        raise NoNextDayError(f"day {d} is the last day; no next-day signal")
    if not 1 <= d < pds.D:
        raise InvalidInputError(f"day {d} out of range 1..{pds.D - 1}")
    x = pds.values[:, i, d]  # 0-based column d is day d + 1
    return float(x @ x - x.mean() ** 2)


def sv_pairs(pds: PreprocessedDataset, days) -> tuple[np.ndarray, np.ndarray]:
    """Inputs ``x_d(t_i)`` and targets for every hour of the listed days."""
    X, y = [], []
    for d in days:
        for i in range(pds.values.shape[1]):
            X.append(pds.signal(d, i))
            y.append(target_sv(pds, d, i))
    return np.array(X), np.array(y)


def synth_quadratic(g: Graph, seed=0):
    """Random quadratic ``f(x) = ||B x||^2`` with ``B`` supported on the diagonal and edges.

    Each nonzero entry ``B(i, j)``, for ``i == j`` or ``(i, j)`` an edge, is
    uniform on ``[-1, 1]`` and drawn independently (so ``B`` need not be symmetric).
    """
    rng = np.random.default_rng(seed)
    n = g.order
    support = (g.weights != 0) | np.eye(n, dtype=bool)
    Bq = np.where(support, rng.uniform(-1, 1, (n, n)), 0.0)
    Bq.setflags(write=False)

    def f(X):
        X = np.asarray(X, dtype=float)
        Y = X @ Bq.T
        return (Y * Y).sum(axis=-1)

    return f, Bq


def sample_domain(N: int, S: int, seed=0) -> np.ndarray:
    """``S`` signals drawn uniformly from ``[-1, 1]^N``."""
    if S < 1 or N < 1:
        raise InvalidInputError("N and S must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, (S, N))
