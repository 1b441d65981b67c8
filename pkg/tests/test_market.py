import io
import logging
import math
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, strategies as st

from agent_thermo.market import (
    CalibrationParams,
    EmptyWindowError,
    MarketDataError,
    OUTPUT_HEADER,
    TradeWindow,
    half_kt_gap,
    ingest_windows,
    market_chemical_potential,
    output_csv,
    parse_duration,
    parse_timestamp,
    realized_volatility,
    trade_potential,
    volatility_to_temperature,
)
from agent_thermo.model import DomainError

T0 = datetime(2024, 1, 2, tzinfo=timezone.utc)


def window(buys, sells, sigma=0.2):
    return TradeWindow(T0, T0 + timedelta(hours=1), buys, sells, sigma)


def write_fixture(tmp_path, trades, prices):
    tf = tmp_path / "trades.csv"
    pf = tmp_path / "prices.csv"
    tf.write_text("timestamp,side\n" + "".join(f"{ts},{side}\n" for ts, side in trades))
    pf.write_text("timestamp,price\n" + "".join(f"{ts},{price}\n" for ts, price in prices))
    return tf, pf


def stamp(seconds):
    return (T0 + timedelta(seconds=seconds)).isoformat().replace("+00:00", "Z")


@pytest.mark.parametrize("buys, sells, expected", [(51, 49, 0.02), (7, 7, 0.0), (100, 0, 1.0), (0, 3, -1.0)])
def test_trade_potential(buys, sells, expected):
    assert trade_potential(buys, sells) == pytest.approx(expected, abs=1e-16)


def test_trade_potential_empty():
    with pytest.raises(EmptyWindowError):
        trade_potential(0, 0)


def test_volatility_to_temperature():
    assert volatility_to_temperature(0.0, CalibrationParams()) == 0.0
    assert volatility_to_temperature(0.2, CalibrationParams(5.0)) == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(DomainError):
        CalibrationParams(0.0)


def test_market_chemical_potential_examples():
    calib = CalibrationParams(5.0)  # sigma 0.2 -> T = 1
    w = window(10100, 9900)  # trade potential 0.01
    assert market_chemical_potential(w, calib) == pytest.approx(0.49995, rel=1e-14)
    assert half_kt_gap(w) == pytest.approx(1e-4, rel=1e-12)
    assert market_chemical_potential(window(5, 5), calib) == pytest.approx(0.5, rel=1e-15)
    assert market_chemical_potential(window(5, 3, sigma=0.0), calib) == 0.0


@given(
    st.integers(0, 10**6),
    st.integers(0, 10**6),
    st.floats(min_value=1e-6, max_value=10.0),
    st.floats(min_value=0.01, max_value=100.0),
)
def test_mu_ratio_identity(buys, sells, sigma, c):
    if buys + sells == 0:
        return
    w = window(buys, sells, sigma)
    calib = CalibrationParams(c)
    ratio = market_chemical_potential(w, calib) / (0.5 * c * sigma)
    n_pot = w.trade_potential
    assert ratio == pytest.approx(1 - n_pot * n_pot, rel=1e-12, abs=1e-15)


@given(st.integers(0, 10**4), st.integers(1, 10**6))
def test_small_trade_potential_within_gap(imbalance, half):
    buys, sells = half + imbalance, half
    w = window(buys, sells)
    if abs(w.trade_potential) > 0.01:
        return
    mu = market_chemical_potential(w, CalibrationParams())
    half_kt = 0.5 * 0.2
    assert (half_kt - mu) / half_kt <= 1e-4 * (1 + 1e-12)


@given(st.integers(1, 1000), st.integers(0, 1000), st.floats(min_value=0.01, max_value=1.0))
def test_mu_monotone(buys, sells, sigma):
    calib = CalibrationParams()
    w = window(buys, sells, sigma)
    hotter = market_chemical_potential(window(buys, sells, sigma * 1.5), calib)
    if sells == 0:
        # saturated flow: mu vanishes at every volatility
        assert hotter == market_chemical_potential(w, calib) == 0.0
        return
    assert hotter > market_chemical_potential(w, calib)
    if buys > sells:
        assert market_chemical_potential(window(buys + 1, sells, sigma), calib) < market_chemical_potential(w, calib)


def test_realized_volatility_examples():
    series = [(T0 + timedelta(minutes=i), p) for i, p in enumerate([100.0, 101.0, 100.0])]
    assert realized_volatility(series) == pytest.approx(0.01407189284264975, rel=1e-13)
    scaled = [(ts, 10 * p) for ts, p in series]
    assert realized_volatility(scaled) == pytest.approx(realized_volatility(series), rel=1e-12)
    flat = [(T0 + timedelta(minutes=i), 50.0) for i in range(5)]
    assert realized_volatility(flat) == 0.0
    assert realized_volatility(series, annualization=252) == pytest.approx(0.01407189284264975 * math.sqrt(252))


def test_realized_volatility_rejects():
    with pytest.raises(DomainError):
        realized_volatility([(T0, 1.0), (T0 + timedelta(1), 2.0)])
    with pytest.raises(DomainError):
        realized_volatility([(T0, 1.0), (T0, 2.0), (T0 + timedelta(1), 2.0)])
    with pytest.raises(DomainError):
        realized_volatility([(T0, 1.0), (T0 + timedelta(1), 0.0), (T0 + timedelta(2), 2.0)])


@pytest.mark.parametrize("text, seconds", [("300", 300), ("300s", 300), ("5min", 300), ("1h", 3600), ("1d", 86400)])
def test_parse_duration(text, seconds):
    assert parse_duration(text) == timedelta(seconds=seconds)


@pytest.mark.parametrize("text", ["", "abc", "0", "-5min"])
def test_parse_duration_rejects(text):
    with pytest.raises(DomainError):
        parse_duration(text)


def test_parse_timestamp_utc():
    assert parse_timestamp("2024-01-02T00:00:00Z") == T0
    assert parse_timestamp("2024-01-02T01:00:00+01:00") == T0
    assert parse_timestamp("2024-01-02T00:00:00") == T0


def test_empty_trades_file(tmp_path):
    tf, pf = write_fixture(tmp_path, [], [])
    assert ingest_windows(tf, pf, "1h") == []
    (tmp_path / "blank.csv").write_text("")
    assert ingest_windows(tmp_path / "blank.csv", pf, "1h") == []


def test_ingest_51_49(tmp_path):
    trades = [(stamp(i), "buy") for i in range(51)] + [(stamp(60 + i), "sell") for i in range(49)]
    prices = [(stamp(i * 600), 100 + i % 2) for i in range(6)]
    tf, pf = write_fixture(tmp_path, trades, prices)
    (w,) = ingest_windows(tf, pf, "1h")
    assert (w.buys, w.sells) == (51, 49)
    assert w.trade_potential == pytest.approx(0.02, abs=1e-16)
    assert w.flags == ()
    assert w.realized_vol > 0


def test_malformed_row_names_line_and_column(tmp_path):
    tf, pf = write_fixture(tmp_path, [(stamp(0), "buy"), (stamp(1), "hold")], [])
    with pytest.raises(MarketDataError) as info:
        ingest_windows(tf, pf, "1h")
    assert info.value.line == 3 and info.value.column == "side"
    assert "trades.csv:3" in str(info.value) and "'side'" in str(info.value)


def test_bad_timestamp_and_price(tmp_path):
    tf, pf = write_fixture(tmp_path, [("yesterday", "buy")], [])
    with pytest.raises(MarketDataError) as info:
        ingest_windows(tf, pf, "1h")
    assert (info.value.line, info.value.column) == (2, "timestamp")
    tf, pf = write_fixture(tmp_path, [(stamp(0), "buy")], [(stamp(0), "-3")])
    with pytest.raises(MarketDataError) as info:
        ingest_windows(tf, pf, "1h")
    assert (info.value.line, info.value.column) == (2, "price")


def test_bad_header(tmp_path):
    tf = tmp_path / "t.csv"
    tf.write_text("time,side\n")
    with pytest.raises(MarketDataError) as info:
        ingest_windows(tf, tf, "1h")
    assert info.value.line == 1


def test_empty_and_thin_windows_flagged(tmp_path, caplog):
    trades = [(stamp(0), "buy"), (stamp(2 * 3600 + 5), "sell")]
    prices = [(stamp(i * 60), 100.0 + i) for i in range(3)]
    tf, pf = write_fixture(tmp_path, trades, prices)
    with caplog.at_level(logging.WARNING):
        windows = ingest_windows(tf, pf, "1h")
    assert [w.flags for w in windows] == [(), ("empty", "insufficient_prices"), ("insufficient_prices",)]
    assert math.isnan(windows[2].realized_vol)
    assert "only 0 prices" in caplog.text


def test_unsorted_prices_warn(tmp_path, caplog):
    trades = [(stamp(0), "buy")]
    prices = [(stamp(120), 102.0), (stamp(0), 100.0), (stamp(60), 101.0), (stamp(60), 999.0)]
    tf, pf = write_fixture(tmp_path, trades, prices)
    with caplog.at_level(logging.WARNING):
        (w,) = ingest_windows(tf, pf, "1h")
    assert "not strictly increasing" in caplog.text
    expected = realized_volatility([(T0 + timedelta(seconds=s), p) for s, p in [(0, 100.0), (60, 101.0), (120, 102.0)]])
    assert w.realized_vol == expected


def test_output_csv_layout_and_determinism(tmp_path):
    trades = [(stamp(i), "buy" if i % 2 else "sell") for i in range(10)]
    prices = [(stamp(i * 60), 100.0) for i in range(4)]
    tf, pf = write_fixture(tmp_path, trades, prices)
    calib = CalibrationParams()
    first = output_csv(ingest_windows(tf, pf, "1h"), calib)
    second = output_csv(ingest_windows(tf, pf, "1h"), calib)
    assert first == second
    lines = first.splitlines()
    assert lines[0] == ",".join(OUTPUT_HEADER)
    assert lines[1] == "2024-01-02T00:00:00Z,2024-01-02T01:00:00Z,5,5,0.0,0.0,0.0,0.0,0.0"


def test_output_blank_for_undefined():
    w = TradeWindow(T0, T0 + timedelta(hours=1), 0, 0, math.nan, ("empty", "insufficient_prices"))
    row = output_csv([w], CalibrationParams()).splitlines()[1]
    assert row == "2024-01-02T00:00:00Z,2024-01-02T01:00:00Z,0,0,,,,,"


def test_reads_from_stream():
    from agent_thermo.market import read_trades

    rows = read_trades(io.StringIO("timestamp,side\n2024-01-02T00:00:00Z,BUY\n"))
    assert rows == [(T0, 1)]
