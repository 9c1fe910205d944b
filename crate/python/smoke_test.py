"""Smoke test for the `ared` extension module.

Build and run (from the repository root):

    cargo build --release -p ared-py --features extension-module
    mkdir -p /tmp/ared-py && cp target/release/libared.so /tmp/ared-py/ared.so
    PYTHONPATH=/tmp/ared-py python3 python/smoke_test.py

or install with `pip install ./crates/py` (maturin backend) and run directly.
"""

import json
import math
import os
import sys
import tempfile

import ared


def check(cond, msg):
    if not cond:
        print(f"FAIL {msg}")
        sys.exit(1)
    print(f"ok   {msg}")


def main():
    check(abs(ared.peaks(0.0, 0.0) - 0.98101184312) < 1e-9, "peaks(0, 0)")
    check(ared.evaluate("gauss2d", [0.5]) == ared.bimodal_gaussian(0.5), "evaluate dispatch")
    m = ared.error_metrics([1.0, 2.0, 4.0], [1.0, 2.0, 3.0])
    check(abs(m["mae"] - 1.0 / 3.0) < 1e-12, "error_metrics mae")

    # Manual propose/record loop against a known function.
    f = ared.bimodal_gaussian
    s = ared.Session([(0.0, 1.0)], [([0.0], f(0.0)), ([1.0], f(1.0))], seed=5)
    check(s.status == "ready_to_propose", "fresh session status")
    try:
        s.record(1.0)
        check(False, "record before propose raises")
    except ared.WrongStateError:
        check(True, "record before propose raises WrongStateError")

    steps = 0
    while not s.converged and steps < 40:
        try:
            p = s.propose()
        except ared.Error as e:
            print(f"     stopped: {e}")
            break
        check(p["d"] > p["threshold"], f"proposal {steps} clears threshold")
        s.record(f(p["coords"][0]))
        steps += 1
    print(f"     {s!r}")
    check(len(s.archive) == 2 + steps, "archive grows by one per record")
    check(len(s.history) == steps, "history has one entry per record")
    check(math.isfinite(s.predict([0.3])), "session prediction")

    # Session document round trip.
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "session.json")
        s.save(path)
        back = ared.Session.load(path)
        check(back.to_json() == s.to_json(), "session save/load round trip")

        model = s.export_model(force=True)
        mpath = os.path.join(d, "model.json")
        model.save(mpath)
        loaded = ared.Model.load(mpath)
        check(abs(loaded.predict([0.3]) - s.predict([0.3])) < 1e-12, "model artifact prediction")

        doc = json.loads(model.to_json())
        doc["bias"] += 1e-6
        try:
            ared.Model.from_json(json.dumps(doc))
            check(False, "tampered artifact rejected")
        except ared.DocumentError:
            check(True, "tampered artifact rejected")

    # Request JSON path, as used by the CLI and HTTP API.
    req = {"bounds": [[-3, 3], [-3, 3]], "seed": 2,
           "initial": [{"coords": [x, y], "value": ared.peaks(x, y)}
                       for x in (-3.0, 3.0) for y in (-3.0, 3.0)]}
    s2 = ared.Session.from_request(json.dumps(req))
    p = s2.propose()
    check(len(p["coords"]) == 2 and p["provenance"] == "drawn", "2-variable proposal")

    auto = ared.run_autonomous("gauss2d", seed=3)
    check(auto.status in ("converged", "failed"), f"autonomous run ends ({auto.status})")

    rows = ared.run_comparison("gauss2d", trials=1, seed=1)
    check(len(rows) == 2 and {r["source"] for r in rows} >= {"ared"}, "comparison rows")
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
