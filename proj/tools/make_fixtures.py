#!/usr/bin/env python3
"""Regenerates the scenario scripts under tests/fixtures/scripts."""

import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "scripts"


def pushes(start, count, rate, depth, duration=250):
    period = 60000.0 / rate
    return [{"start_ms": start + round(k * period), "depth_cm": depth, "duration_ms": duration} for k in range(count)]


def script(trainee, started_at, events, compressions, tilt, end_ms, abort=False):
    return {
        "schema": 1,
        "trainee": trainee,
        "started_at": started_at,
        "device": {"rest_height_cm": 20.0, "sample_rate_hz": 20, "noise_sigma_cm": 0.05, "seed": 1,
                   "gyro": True, "max_travel_cm": 6.5, "clock": "stepped"},
        "events": events,
        "compressions": compressions,
        "tilt": tilt,
        "end_ms": end_ms,
        "abort": abort,
    }


def ev(ts, kind, **payload):
    return dict(ts=ts, kind=kind, **payload)


HEAD = [
    ev(1000, "GlassDisposed"),
    ev(2000, "Keyphrase", keyphrase="are-you-okay"),
    ev(2500, "HandsOnShoulders"),
    ev(3000, "PositionTriggerEntered", zone="head"),
]
TILT = [{"ts": 3200, "degrees": 25.0}, {"ts": 4500, "degrees": 0.0}]
MIDDLE = [
    ev(8000, "HeadAboveMouth", hold_ms=3000),
    ev(9000, "Keyphrase", keyphrase="not-breathing"),
    ev(10000, "PhoneDialed", number="112"),
    ev(11000, "Keyphrase", keyphrase="get-aed"),
]
TAIL = [
    ev(30000, "VentilationDelivered"),
    ev(31000, "VentilationDelivered"),
    ev(32000, "AedPadPlaced", side="right"),
    ev(33000, "AedPadPlaced", side="left"),
    ev(34000, "Keyphrase", keyphrase="stand-back"),
    ev(35000, "AedShockPressed"),
]


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    fixtures = {
        "perfect": script("alice", "2026-03-02T09:00:00Z", HEAD + MIDDLE + TAIL, pushes(12000, 30, 105, 5.5), TILT,
                          36000),
        # Calls the ambulance and asks for the AED before checking the victim.
        "shuffled": script("bob", "2026-03-02T10:00:00Z",
                           [ev(1000, "GlassDisposed"), ev(1500, "PhoneDialed", number="112"),
                            ev(1800, "Keyphrase", keyphrase="get-aed")] + HEAD[1:] + MIDDLE[:2] + TAIL,
                           pushes(12000, 30, 105, 5.5), TILT, 36000),
        "aborted": script("carol", "2026-03-02T11:00:00Z", HEAD, [], TILT, 6000, abort=True),
        # Slow, shallow compressions and a late breathing check.
        "sloppy": script("dave", "2026-03-02T12:00:00Z",
                         HEAD + [ev(16000, "HeadAboveMouth", hold_ms=3000), ev(17000, "Keyphrase", keyphrase="not-breathing"),
                                 ev(18000, "PhoneDialed", number="112"), ev(19000, "Keyphrase", keyphrase="get-aed")]
                         + [dict(e, ts=e["ts"] + 20000) for e in TAIL],
                         pushes(20000, 30, 80, 4.5), TILT, 56000),
    }
    for name, body in fixtures.items():
        (OUT / f"{name}.json").write_text(json.dumps(body, indent=2) + "\n")


if __name__ == "__main__":
    main()
