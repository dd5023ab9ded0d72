#!/usr/bin/env python3
"""Rebuilds fixtures/btc_usd_daily.csv and its manifest.

Sources (both public, redistributed inside PyPI packages):
  * daily Bitstamp BTC/USD bars, 2014-11-28 .. 2020-01-17
      tensortrade==1.0.3 sdist: tests/data/input/bitstamp_(BTC,ETH,LTC)USD_d.csv
  * monthly BTC/USD bars, 2012-01 .. 2024-12
      backtesting==0.6.6 wheel: backtesting/test/BTCUSD.csv

Days 2015-12-31 .. 2020-01-17 are the real daily bars. Days missing from the
source are written as `null` rows. Days 2020-01-18 .. 2023-04-06 have no daily
source available offline; they are reconstructed per month as a seeded
log-space Brownian bridge from the real monthly open to the real monthly close,
scaled so the path's extremes land on the real monthly high and low. Volume
is quoted in USD (base volume times close). Adj Close equals Close.

usage: build_btc_fixture.py DAILY_CSV MONTHLY_CSV OUT_DIR
"""
import csv
import datetime as dt
import hashlib
import json
import math
import pathlib
import random
import sys

START = dt.date(2015, 12, 31)
END = dt.date(2023, 4, 6)
REAL_END = dt.date(2020, 1, 17)
SEED = 20230406


def read_daily(path):
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        idx = {name: i for i, name in enumerate(header)}
        for rec in reader:
            day = dt.date.fromisoformat(rec[0])
            if not START <= day <= REAL_END:
                continue
            vals = [rec[idx["BTC:" + k]] for k in ("open", "high", "low", "close", "volume")]
            if any(v == "" for v in vals):
                continue
            o, h, l, c, v = map(float, vals)
            rows[day] = (o, h, l, c, v * c)
    return rows


def read_monthly(path):
    months = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for rec in reader:
            day = dt.date.fromisoformat(rec[0])
            months[(day.year, day.month)] = tuple(map(float, rec[1:6]))
    return months


def bridge(n, rng):
    walk = [0.0]
    for _ in range(n):
        walk.append(walk[-1] + rng.gauss(0.0, 1.0))
    return [walk[i] - walk[-1] * i / n for i in range(n + 1)]


def fit_scale(base, shape, target, upper):
    # bisection on the amplitude applied to one sign of the bridge
    sel = [s if (s > 0) == upper else 0.0 for s in shape]
    if not any(sel):
        return 0.0
    lo, hi = 0.0, 1.0
    extreme = max if upper else min
    while (extreme(b + hi * s for b, s in zip(base, sel)) - target) * (1 if upper else -1) < 0 and hi < 1e6:
        hi *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        val = extreme(b + mid * s for b, s in zip(base, sel))
        if (val - target) * (1 if upper else -1) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def reconstruct(months, rng):
    out = {}
    year, month = REAL_END.year, REAL_END.month
    while (year, month) <= (END.year, END.month):
        o, h, l, c, vol = months[(year, month)]
        first = dt.date(year, month, 1)
        nxt = dt.date(year + (month == 12), month % 12 + 1, 1)
        days = (nxt - first).days
        base = [math.log(o) + (math.log(c) - math.log(o)) * i / days for i in range(days + 1)]
        shape = bridge(days, rng)
        up = fit_scale(base, shape, math.log(h), True)
        down = fit_scale(base, shape, math.log(l), False)
        path = [b + (up if s > 0 else down) * s for b, s in zip(base, shape)]
        daily_base_volume = vol / days
        for i in range(days):
            day = first + dt.timedelta(days=i)
            if day <= REAL_END or day > END:
                continue
            d_open, d_close = math.exp(path[i]), math.exp(path[i + 1])
            wick = abs(rng.gauss(0.0, 0.01))
            d_high = min(max(d_open, d_close) * (1.0 + wick), max(h, d_open, d_close))
            d_low = max(min(d_open, d_close) * (1.0 - abs(rng.gauss(0.0, 0.01))), min(l, d_open, d_close))
            d_vol = daily_base_volume * math.exp(rng.gauss(0.0, 0.3)) * d_close
            out[day] = (d_open, d_high, d_low, d_close, d_vol)
        year, month = (year + 1, 1) if month == 12 else (year, month + 1)
    return out


def main():
    daily_path, monthly_path, out_dir = sys.argv[1:4]
    rows = read_daily(daily_path)
    rows.update(reconstruct(read_monthly(monthly_path), random.Random(SEED)))
    out = pathlib.Path(out_dir)
    lines = ["Date,Open,High,Low,Close,Adj Close,Volume"]
    valid = nulls = 0
    day = START
    while day <= END:
        if day in rows:
            o, h, l, c, v = rows[day]
            lines.append(f"{day.isoformat()},{o:.2f},{h:.2f},{l:.2f},{c:.2f},{c:.2f},{v:.0f}")
            valid += 1
        else:
            lines.append(f"{day.isoformat()},null,null,null,null,null,null")
            nulls += 1
        day += dt.timedelta(days=1)
    body = ("\n".join(lines) + "\n").encode()
    (out / "btc_usd_daily.csv").write_bytes(body)
    manifest = {
        "file": "btc_usd_daily.csv",
        "sha256": hashlib.sha256(body).hexdigest(),
        "data_rows": valid + nulls,
        "valid_rows": valid,
        "null_rows": nulls,
        "first_date": START.isoformat(),
        "last_date": END.isoformat(),
        "real_daily_through": REAL_END.isoformat(),
        "reconstruction_seed": SEED,
    }
    (out / "btc_usd_daily.manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(json.dumps(manifest, indent=2))


if __name__ == "__main__":
    main()
