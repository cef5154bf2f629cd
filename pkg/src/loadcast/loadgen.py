"""Synthetic hourly load profiles.

The generated signal is a base level plus a daily sinusoid, a weekend dip,
an annual sinusoid and Gaussian noise::

    load(t) = base + daily_amp * sin(2*pi*(h - 7) / 24)
                   + weekend(t)
                   + seasonal_amp * sin(2*pi*(d - 15) / 365.25)
                   + noise(t)

with ``h`` the hour of day, ``d`` the day of year and
``weekend(t) = base * (weekend_factor - 1)`` on Saturdays and Sundays.
Values are floored at ``0.1 * base``.

Noise comes from a PCG64 bit stream turned into normals with the
Box-Muller transform, so the output depends only on the seed and not on
numpy's (version dependent) normal samplers.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Union

import numpy as np

PRNG_NAME = "PCG64+BoxMuller"
HOUR = np.timedelta64(1, "h")

TimeLike = Union[str, datetime, np.datetime64]


def to_datetime64(value: TimeLike) -> np.datetime64:
    """Parse a timestamp into ``datetime64[s]`` (naive values are taken as UTC)."""
    if isinstance(value, np.datetime64):
        return value.astype("datetime64[s]")
    if isinstance(value, datetime):
        if value.tzinfo is not None:
            value = value.replace(tzinfo=None) - value.utcoffset()
        return np.datetime64(value, "s")
    text = str(value).strip()
    if text.endswith("Z"):
        text = text[:-1]
    elif text.endswith("+00:00"):
        text = text[:-6]
    return np.datetime64(text, "s")


def format_timestamp(ts: np.datetime64) -> str:
    return str(ts.astype("datetime64[s]")) + "Z"


def _is_hour_aligned(ts: np.datetime64) -> bool:
    return ts.astype("datetime64[h]").astype("datetime64[s]") == ts


@dataclass(frozen=True)
class GeneratorConfig:
    start: np.datetime64 = field(default_factory=lambda: np.datetime64("2023-10-01T00:00:00"))
    end: np.datetime64 = field(default_factory=lambda: np.datetime64("2025-02-01T00:00:00"))
    base_mw: float = 100.0
    daily_amp_mw: float = 20.0
    weekend_factor: float = 0.9
    seasonal_amp_mw: float = 15.0
    noise_sigma_mw: float = 5.0
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "start", to_datetime64(self.start))
        object.__setattr__(self, "end", to_datetime64(self.end))
        if not (_is_hour_aligned(self.start) and _is_hour_aligned(self.end)):
            raise ValueError("start and end must be aligned to whole hours")
        if self.end <= self.start:
            raise ValueError("end must be after start")
        if not self.base_mw > 0:
            raise ValueError("base_mw must be positive")
        for name in ("daily_amp_mw", "seasonal_amp_mw", "noise_sigma_mw"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0 < self.weekend_factor <= 1.5:
            raise ValueError("weekend_factor must lie in (0, 1.5]")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def n_hours(self) -> int:
        return int((self.end - self.start) // HOUR)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["start"] = format_timestamp(self.start)
        d["end"] = format_timestamp(self.end)
        d["seed"] = int(self.seed)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        return cls(**d)


@dataclass(frozen=True, eq=False)
class LoadSeries:
    """Hourly load values (MW) with their UTC timestamps."""

    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps).astype("datetime64[s]")
        vals = np.asarray(self.values, dtype=float)
        if ts.ndim != 1 or vals.shape != ts.shape:
            raise ValueError("timestamps and values must be 1-D and of equal length")
        if not np.all(np.isfinite(vals)):
            raise ValueError("load values must be finite")
        if ts.size > 1 and np.any(np.diff(ts) != HOUR):
            raise ValueError("timestamps must advance in steps of exactly one hour")
        ts.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, LoadSeries):
            return NotImplemented
        return (np.array_equal(self.timestamps, other.timestamps)
                and np.array_equal(self.values, other.values))

    def slice(self, start: int, stop: int) -> "LoadSeries":
        return LoadSeries(self.timestamps[start:stop], self.values[start:stop])


def box_muller_normals(seed: int, n: int) -> np.ndarray:
    """``n`` standard normals from a PCG64 stream via the Box-Muller transform."""
    pairs = (n + 1) // 2
    raw = np.random.PCG64(int(seed)).random_raw(2 * pairs)
    # 53-bit uniforms on (0, 1]; the +1 keeps log() finite
    u = ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u1, u2 = u[0::2], u[1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(theta)
    z[1::2] = radius * np.sin(theta)
    return z[:n]


def calendar_fields(timestamps: np.ndarray) -> dict[str, np.ndarray]:
    """Hour, day of week (Mon=0), day of year (1-based) and month (1-12)."""
    ts = np.asarray(timestamps).astype("datetime64[s]")
    days = ts.astype("datetime64[D]")
    hour = ((ts - days) // HOUR).astype(np.int64)
    # 1970-01-01 was a Thursday
    day_of_week = (days.astype(np.int64) + 3) % 7
    years = ts.astype("datetime64[Y]")
    day_of_year = (days - years.astype("datetime64[D]")).astype(np.int64) + 1
    month = ts.astype("datetime64[M]").astype(np.int64) % 12 + 1
    return {"hour": hour, "day_of_week": day_of_week,
            "day_of_year": day_of_year, "month": month}


def deterministic_profile(config: GeneratorConfig, timestamps: np.ndarray) -> np.ndarray:
    cal = calendar_fields(timestamps)
    h = cal["hour"].astype(float)
    d = cal["day_of_year"].astype(float)
    weekend = cal["day_of_week"] >= 5
    load = (config.base_mw
            + config.daily_amp_mw * np.sin(2.0 * math.pi * (h - 7.0) / 24.0)
            + np.where(weekend, config.base_mw * (config.weekend_factor - 1.0), 0.0)
            + config.seasonal_amp_mw * np.sin(2.0 * math.pi * (d - 15.0) / 365.25))
    return load


def generate_profile(config: GeneratorConfig) -> LoadSeries:
    n = config.n_hours
    timestamps = config.start + np.arange(n) * HOUR
    load = deterministic_profile(config, timestamps)
    if config.noise_sigma_mw > 0:
        load = load + config.noise_sigma_mw * box_muller_normals(config.seed, n)
    load = np.maximum(load, 0.1 * config.base_mw)
    return LoadSeries(timestamps, load)


def split_train_test(series: LoadSeries, test_fraction: float = 0.2) -> tuple[LoadSeries, LoadSeries]:
    """Chronological split: the first ``ceil(n * (1 - test_fraction))`` points train."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    n = len(series)
    if n < 10:
        raise ValueError(f"series too short to split (n={n}, need >= 10)")
    # guard against 0.8 * n landing a hair above an integer
    n_train = math.ceil(round(n * (1.0 - test_fraction), 9))
    return series.slice(0, n_train), series.slice(n_train, n)
