"""Capital-market application: trade potential, volatility-derived temperature
and the chemical potential of an investor population.

Each trade counts as one agent decision (buy -> conform, sell -> non-conform);
volumes are ignored.  Temperature is ``T = c * sigma`` with a user-supplied
calibration constant ``c``, so temperatures are relative to that calibration.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import re
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Iterable, List, Optional, Sequence, TextIO, Tuple, Union

from .model import DomainError

logger = logging.getLogger(__name__)

TRADES_HEADER = ("timestamp", "side")
PRICES_HEADER = ("timestamp", "price")
OUTPUT_HEADER = (
    "window_start",
    "window_end",
    "n_plus",
    "n_minus",
    "trade_potential",
    "sigma",
    "temperature",
    "mu",
    "mu_half_kT_gap",
)
CSV_SCHEMA_VERSION = 1

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


class MarketDataError(ValueError):
    """Malformed market input; carries file, line and column context."""

    def __init__(self, message: str, source: str = "<input>", line: Optional[int] = None, column: Optional[str] = None):
        where = source if line is None else f"{source}:{line}"
        if column is not None:
            where += f" (column {column!r})"
        super().__init__(f"{where}: {message}")
        self.source = source
        self.line = line
        self.column = column


class EmptyWindowError(DomainError):
    """A window without any trades has no trade potential."""


@dataclass(frozen=True)
class CalibrationParams:
    temp_per_vol: float = 1.0
    k: float = 1.0

    def __post_init__(self):
        if not (self.temp_per_vol > 0 and math.isfinite(self.temp_per_vol)):
            raise DomainError("temp_per_vol must be positive", "temp_per_vol")
        if not (self.k > 0 and math.isfinite(self.k)):
            raise DomainError("k must be positive", "k")


@dataclass(frozen=True)
class TradeWindow:
    window_start: datetime
    window_end: datetime
    buys: int
    sells: int
    realized_vol: float
    flags: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.window_end <= self.window_start:
            raise DomainError("window_end must be after window_start", "window_end")
        if self.buys < 0 or self.sells < 0:
            raise DomainError("trade counts must be nonnegative", "buys")
        if self.realized_vol < 0:
            raise DomainError("realized volatility must be nonnegative", "realized_vol")

    @property
    def is_empty(self) -> bool:
        return self.buys + self.sells == 0

    @property
    def trade_potential(self) -> float:
        return trade_potential(self.buys, self.sells)


def trade_potential(buys: int, sells: int) -> float:
    """(buys - sells) / (buys + sells)."""
    if buys < 0 or sells < 0:
        raise DomainError("trade counts must be nonnegative", "buys")
    total = buys + sells
    if total < 1:
        raise EmptyWindowError("trade potential of an empty window is undefined", "buys")
    return (buys - sells) / total


def volatility_to_temperature(sigma: float, calib: CalibrationParams) -> float:
    if sigma < 0 or math.isnan(sigma):
        raise DomainError("volatility must be nonnegative", "sigma")
    return calib.temp_per_vol * sigma


def market_chemical_potential(window: TradeWindow, calib: CalibrationParams) -> float:
    """mu = k T / 2 * (1 - trade_potential^2) with T = c * sigma."""
    n_pot = window.trade_potential
    T = volatility_to_temperature(window.realized_vol, calib)
    return 0.5 * calib.k * T * (1.0 - n_pot * n_pot)


def half_kt_gap(window: TradeWindow) -> float:
    """Relative shortfall of mu below kT/2, which equals trade_potential^2."""
    n_pot = window.trade_potential
    return n_pot * n_pot


def realized_volatility(
    prices: Sequence[Tuple[datetime, float]], annualization: Optional[float] = None
) -> float:
    """Sample standard deviation of close-to-close log returns.

    ``annualization`` multiplies the result by ``sqrt(annualization)`` (e.g. 252
    for daily windows); the default leaves the raw per-window value.
    """
    if len(prices) < 3:
        raise DomainError(f"need at least 3 prices, got {len(prices)}", "prices")
    last_ts = None
    for ts, price in prices:
        if not price > 0:
            raise DomainError(f"prices must be positive, got {price!r}", "price")
        if last_ts is not None and ts <= last_ts:
            raise DomainError("price timestamps must be strictly increasing", "timestamp")
        last_ts = ts
    logs = [math.log(price) for _, price in prices]
    returns = [b - a for a, b in zip(logs, logs[1:])]
    mean = math.fsum(returns) / len(returns)
    var = math.fsum((r - mean) ** 2 for r in returns) / (len(returns) - 1)
    sigma = math.sqrt(var)
    if annualization is not None:
        sigma *= math.sqrt(annualization)
    return sigma


# ---------------------------------------------------------------------------
# ingestion

_DURATION_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(s|sec|min|m|h|d)?\s*$")
_DURATION_UNITS = {None: 1, "s": 1, "sec": 1, "min": 60, "m": 60, "h": 3600, "d": 86400}


def parse_duration(text: Union[str, timedelta]) -> timedelta:
    """'300', '300s', '5min', '1h' or '1d' -> timedelta."""
    if isinstance(text, timedelta):
        delta = text
    else:
        match = _DURATION_RE.match(text)
        if not match:
            raise DomainError(f"cannot parse window duration {text!r}", "window")
        delta = timedelta(seconds=float(match.group(1)) * _DURATION_UNITS[match.group(2)])
    if delta <= timedelta(0):
        raise DomainError("window duration must be positive", "window")
    return delta


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def _open(source) -> Tuple[TextIO, str, bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8"), os.fspath(source), True
    return source, getattr(source, "name", "<stream>"), False


def _read_rows(source, header: Tuple[str, ...]) -> Iterable[Tuple[int, dict, str]]:
    handle, name, owned = _open(source)
    try:
        reader = csv.reader(handle)
        first = next(reader, None)
        if first is None:
            return
        if tuple(col.strip() for col in first) != header:
            raise MarketDataError(f"expected header {','.join(header)!r}, got {','.join(first)!r}", name, 1)
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise MarketDataError(f"expected {len(header)} fields, got {len(row)}", name, line)
            yield line, dict(zip(header, (cell.strip() for cell in row))), name
    finally:
        if owned:
            handle.close()


def read_trades(source) -> List[Tuple[datetime, int]]:
    """(timestamp, +1 for buy / -1 for sell) rows in file order."""
    trades = []
    for line, row, name in _read_rows(source, TRADES_HEADER):
        try:
            ts = parse_timestamp(row["timestamp"])
        except ValueError as exc:
            raise MarketDataError(f"bad timestamp {row['timestamp']!r}: {exc}", name, line, "timestamp") from None
        side = row["side"].lower()
        if side not in ("buy", "sell"):
            raise MarketDataError(f"side must be 'buy' or 'sell', got {row['side']!r}", name, line, "side")
        trades.append((ts, 1 if side == "buy" else -1))
    return trades


def read_prices(source) -> List[Tuple[datetime, float]]:
    prices = []
    for line, row, name in _read_rows(source, PRICES_HEADER):
        try:
            ts = parse_timestamp(row["timestamp"])
        except ValueError as exc:
            raise MarketDataError(f"bad timestamp {row['timestamp']!r}: {exc}", name, line, "timestamp") from None
        try:
            price = float(row["price"])
        except ValueError:
            raise MarketDataError(f"bad price {row['price']!r}", name, line, "price") from None
        if not (price > 0 and math.isfinite(price)):
            raise MarketDataError(f"price must be positive, got {row['price']!r}", name, line, "price")
        prices.append((ts, price))
    return prices


def _bucket(ts: datetime, window: timedelta) -> int:
    return int((ts - _EPOCH) // window)


def ingest_windows(
    trades_file,
    prices_file,
    window: Union[str, timedelta],
    annualization: Optional[float] = None,
) -> List[TradeWindow]:
    """Aggregate trades and prices into epoch-aligned windows of length ``window``.

    Windows run from the first to the last window containing a trade; windows
    in between without trades are kept and flagged ``"empty"``.  A window
    with fewer than 3 prices gets ``realized_vol = nan`` and the flag
    ``"insufficient_prices"``.
    """
    window = parse_duration(window)
    trades = read_trades(trades_file)
    prices = read_prices(prices_file)
    if not trades:
        return []

    if any(b[0] < a[0] for a, b in zip(trades, trades[1:])):
        logger.warning("trade timestamps are not sorted; aggregating by window anyway")
    if any(b[0] <= a[0] for a, b in zip(prices, prices[1:])):
        logger.warning("price timestamps are not strictly increasing; sorting and dropping duplicates")
        dedup = {}
        for ts, price in prices:
            dedup.setdefault(ts, price)
        prices = sorted(dedup.items())

    counts = {}
    for ts, side in trades:
        bucket = counts.setdefault(_bucket(ts, window), [0, 0])
        bucket[0 if side > 0 else 1] += 1
    price_buckets = {}
    for ts, price in prices:
        price_buckets.setdefault(_bucket(ts, window), []).append((ts, price))

    out = []
    for idx in range(min(counts), max(counts) + 1):
        buys, sells = counts.get(idx, (0, 0))
        flags = []
        if buys + sells == 0:
            flags.append("empty")
        series = price_buckets.get(idx, [])
        if len(series) >= 3:
            sigma = realized_volatility(series, annualization)
        else:
            sigma = math.nan
            flags.append("insufficient_prices")
            if buys + sells:
                logger.warning("window %d has trades but only %d prices", idx, len(series))
        start = _EPOCH + idx * window
        out.append(TradeWindow(start, start + window, buys, sells, sigma, tuple(flags)))
    return out


def _fmt(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return repr(float(value))


def window_record(window: TradeWindow, calib: CalibrationParams) -> dict:
    """One output row; undefined quantities are None."""
    record = {
        "window_start": format_timestamp(window.window_start),
        "window_end": format_timestamp(window.window_end),
        "n_plus": window.buys,
        "n_minus": window.sells,
        "trade_potential": None,
        "sigma": None if math.isnan(window.realized_vol) else window.realized_vol,
        "temperature": None,
        "mu": None,
        "mu_half_kT_gap": None,
    }
    if record["sigma"] is not None:
        record["temperature"] = volatility_to_temperature(window.realized_vol, calib)
    if not window.is_empty:
        record["trade_potential"] = window.trade_potential
        record["mu_half_kT_gap"] = half_kt_gap(window)
        if record["sigma"] is not None:
            record["mu"] = market_chemical_potential(window, calib)
    return record


def write_output_csv(windows: Sequence[TradeWindow], calib: CalibrationParams, handle: TextIO) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(OUTPUT_HEADER)
    for window in sorted(windows, key=lambda w: w.window_start):
        record = window_record(window, calib)
        writer.writerow(
            [
                record[col] if isinstance(record[col], (str, int)) else _fmt(record[col])
                for col in OUTPUT_HEADER
            ]
        )


def output_csv(windows: Sequence[TradeWindow], calib: CalibrationParams) -> str:
    buf = io.StringIO()
    write_output_csv(windows, calib, buf)
    return buf.getvalue()
