"""Hourly electricity price series: loading, splitting, windows, synthesis.

Prices are EUR/kWh internally. Negative prices are legitimate market data
and pass through untouched.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import PriceDataError

HOURS_PER_DAY = 24

# Arbitrary but fixed start for synthetic series (hour 0 of a day, UTC).
SYNTHETIC_START = datetime(2024, 1, 1, tzinfo=timezone.utc)

_TS_FORMAT = "%Y-%m-%dT%H:%M:%SZ"

_UNIT_SCALE = {
    "eur/kwh": 1.0,
    "eur/mwh": 1e-3,
}


def _normalize_unit(unit: str) -> float:
    key = unit.strip().lower().replace("€", "eur")
    if key not in _UNIT_SCALE:
        raise PriceDataError(
            f"unknown price unit {unit!r}: expected one of 'EUR/kWh', 'EUR/MWh'"
        )
    return _UNIT_SCALE[key]


@dataclass(frozen=True)
class PriceSeries:
    """A gapless hourly price sequence starting at a UTC hour boundary."""

    start: datetime
    prices: np.ndarray

    def __post_init__(self):
        if self.start.tzinfo is None:
            raise PriceDataError("PriceSeries start must be timezone-aware (UTC)")
        if self.start.minute or self.start.second or self.start.microsecond:
            raise PriceDataError("PriceSeries start must fall on an hour boundary")
        arr = np.asarray(self.prices, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise PriceDataError("prices must be a non-empty 1-D array")
        if not np.all(np.isfinite(arr)):
            raise PriceDataError("prices must be finite")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "prices", arr)

    def __len__(self) -> int:
        return int(self.prices.size)

    @property
    def n_days(self) -> int:
        return len(self) // HOURS_PER_DAY

    def timestamp(self, index: int) -> datetime:
        if not 0 <= index < len(self):
            raise IndexError(f"hour index {index} outside series of length {len(self)}")
        return self.start + timedelta(hours=index)


@dataclass(frozen=True)
class DatasetSplit:
    train: PriceSeries
    test: PriceSeries
    policy: str = "chronological-tail"


def load_price_csv(path, unit: str) -> PriceSeries:
    """Load ``timestamp,price`` rows into a PriceSeries.

    Timestamps must be consecutive UTC hours formatted
    ``YYYY-MM-DDTHH:00:00Z``; the ``unit`` flag selects EUR/kWh or EUR/MWh
    (the latter is divided by 1000 at this boundary). Errors report the
    offending line number; gaps name the first missing timestamp.
    """
    scale = _normalize_unit(unit)
    start = None
    values: list[float] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PriceDataError(f"{path}: empty file") from None
        if [h.strip().lower() for h in header] != ["timestamp", "price"]:
            raise PriceDataError(
                f"{path}: line 1: expected header 'timestamp,price', got {','.join(header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise PriceDataError(f"{path}: line {lineno}: expected 2 fields, got {len(row)}")
            ts_text, price_text = row[0].strip(), row[1].strip()
            try:
                ts = datetime.strptime(ts_text, _TS_FORMAT).replace(tzinfo=timezone.utc)
            except ValueError:
                raise PriceDataError(
                    f"{path}: line {lineno}: bad timestamp {ts_text!r} "
                    f"(expected YYYY-MM-DDTHH:00:00Z)"
                ) from None
            if ts.minute or ts.second:
                raise PriceDataError(
                    f"{path}: line {lineno}: timestamp {ts_text!r} not on an hour boundary"
                )
            if start is None:
                start = ts
            else:
                expected = start + timedelta(hours=len(values))
                if ts != expected:
                    missing = expected.strftime(_TS_FORMAT)
                    if ts < expected:
                        raise PriceDataError(
                            f"{path}: line {lineno}: duplicate or out-of-order timestamp {ts_text!r}"
                        )
                    raise PriceDataError(
                        f"{path}: line {lineno}: gap in hourly data, missing {missing}"
                    )
            try:
                price = float(price_text)
            except ValueError:
                raise PriceDataError(
                    f"{path}: line {lineno}: bad price {price_text!r}"
                ) from None
            if not np.isfinite(price):
                raise PriceDataError(f"{path}: line {lineno}: non-finite price {price_text!r}")
            values.append(price * scale)
    if start is None:
        raise PriceDataError(f"{path}: no data rows")
    return PriceSeries(start=start, prices=np.asarray(values))


def split_train_test(series: PriceSeries, test_days: int) -> DatasetSplit:
    """Chronological split: the final ``test_days`` whole days become the test set."""
    if test_days < 1:
        raise ValueError(f"test_days must be >= 1, got {test_days}")
    n_test = test_days * HOURS_PER_DAY
    if len(series) < n_test + HOURS_PER_DAY:
        raise ValueError(
            f"series of {len(series)} hours too short to hold {test_days} test days "
            f"plus at least one training day"
        )
    cut = len(series) - n_test
    train = PriceSeries(start=series.start, prices=series.prices[:cut])
    test = PriceSeries(start=series.timestamp(cut), prices=series.prices[cut:])
    return DatasetSplit(train=train, test=test)


def price_window(series: PriceSeries, end_index: int) -> np.ndarray:
    """The 24 prices ending at ``end_index`` inclusive, oldest first."""
    if end_index < HOURS_PER_DAY - 1:
        raise IndexError(
            f"end_index {end_index} leaves no full 24-hour lookback (need >= 23)"
        )
    if end_index >= len(series):
        raise IndexError(f"end_index {end_index} outside series of length {len(series)}")
    return series.prices[end_index - HOURS_PER_DAY + 1 : end_index + 1].copy()


PATTERNS = ("two-tier", "sinusoid", "random-walk")


@dataclass(frozen=True)
class SyntheticPriceSpec:
    """Recipe for a deterministic synthetic price series.

    ``cheap_hours`` are the low-price hours of day for the two-tier pattern
    and set the trough hour of the sinusoid (its first element). The
    random walk starts at the midpoint of ``low`` and ``high``.
    """

    pattern: str = "two-tier"
    low: float = 0.05
    high: float = 0.30
    cheap_hours: tuple[int, ...] = (0, 1, 2, 3, 4, 5)
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown pattern {self.pattern!r}: expected one of {PATTERNS}")
        if self.noise < 0:
            raise ValueError("noise scale must be >= 0")
        if self.pattern in ("two-tier", "sinusoid") and not self.low < self.high:
            raise ValueError(
                f"low level must be strictly below high level, got low={self.low} high={self.high}"
            )
        if self.pattern == "two-tier" and not self.cheap_hours:
            raise ValueError("two-tier pattern needs at least one cheap hour")
        for h in self.cheap_hours:
            if not 0 <= int(h) < HOURS_PER_DAY:
                raise ValueError(f"cheap hour {h} outside 0..23")


def gen_synthetic(spec: SyntheticPriceSpec, days: int) -> PriceSeries:
    """Generate ``days`` whole days of synthetic prices.

    Identical spec (seed included) yields an identical series.
    """
    if days < 2:
        raise ValueError(f"need days >= 2 (one lookback day plus one episode day), got {days}")
    n = days * HOURS_PER_DAY
    hod = np.arange(n) % HOURS_PER_DAY
    rng = np.random.default_rng(spec.seed)
    if spec.pattern == "two-tier":
        cheap = np.isin(hod, np.asarray(spec.cheap_hours, dtype=np.int64))
        base = np.where(cheap, spec.low, spec.high)
    elif spec.pattern == "sinusoid":
        mid = 0.5 * (spec.low + spec.high)
        amp = 0.5 * (spec.high - spec.low)
        trough = spec.cheap_hours[0] if spec.cheap_hours else 0
        base = mid - amp * np.cos(2.0 * np.pi * (hod - trough) / HOURS_PER_DAY)
    else:  # random-walk
        mid = 0.5 * (spec.low + spec.high)
        if spec.noise > 0:
            steps = rng.normal(0.0, spec.noise, size=n)
            steps[0] = 0.0
            base = mid + np.cumsum(steps)
        else:
            base = np.full(n, mid)
        return PriceSeries(start=SYNTHETIC_START, prices=base)
    if spec.noise > 0:
        base = base + rng.normal(0.0, spec.noise, size=n)
    return PriceSeries(start=SYNTHETIC_START, prices=base)
