"""Smoke test for the Python bindings.

Uses an installed `openext` module if there is one, otherwise loads the
shared library from target/ (build it with `cargo build -p openext-py`).
"""

import cmath
import importlib.machinery
import importlib.util
import json
import os
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent

ONE_CHANNEL = json.dumps(
    {"n1": 2, "n2": 2, "omega": [[0, 0, 1, 1], [0, 3, 0, 0], [1, 0, 1, 0], [1, 0, 0, 2]]}
)
TWO_ATOMS = json.dumps(
    {"dim": 1, "atoms": [{"omega": 1.0, "mass": [[1]]}, {"omega": 2.0, "mass": [[1]]}]}
)
INDEFINITE = json.dumps(
    {"dim": 2, "atoms": [{"omega": 1.0, "mass": [[1, 0], [0, -0.5]]}]}
)


def load():
    try:
        import openext  # noqa: F401

        return openext
    except ImportError:
        pass
    candidates = [os.environ.get("OPENEXT_LIB")] if os.environ.get("OPENEXT_LIB") else []
    for profile in ("release", "debug"):
        for name in ("libopenext_py.so", "libopenext_py.dylib", "openext_py.dll"):
            candidates.append(str(ROOT / "target" / profile / name))
    for path in candidates:
        if path and Path(path).exists():
            loader = importlib.machinery.ExtensionFileLoader("openext", path)
            spec = importlib.util.spec_from_file_location("openext", path, loader=loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit("openext module not found; run `cargo build -p openext-py` first")


def main():
    ox = load()
    print("openext", ox.__version__, ox.SCHEMA)

    tol = json.loads(ox.default_tolerances())
    assert tol["rank"] == 1e-9

    d = json.loads(ox.decompose(ONE_CHANNEL))["result"]
    assert d["dims"]["h1c"] == 1 and d["dims"]["h2c"] == 2
    assert d["string_count"] == 1 and d["bounds_satisfied"]

    c = json.loads(ox.check(ONE_CHANNEL, seed=3))
    assert c["seed"] == 3
    assert c["result"]["dissipation"]["verdict"]
    assert not c["result"]["reconstructibility"]["verdict"]
    assert abs(c["result"]["reconstructibility"]["witness"]["eigenvalue"] - 3.0) < 1e-12

    ok, report = ox.validate(INDEFINITE)
    assert not ok and json.loads(report)["violations"][0]["atom"] == 0

    system = ox.extend(TWO_ATOMS)
    times = [0.1 * k for k in range(128)]
    values = ox.kernel(system, times)
    for t, a in zip(times, values):
        assert abs(a[0][0] - (cmath.exp(-1j * t) + cmath.exp(-2j * t))) < 1e-12

    fitted = json.loads(ox.fit(times, values, max_atoms=4))
    freqs = sorted(a["omega"] for a in fitted["atoms"])
    assert all(abs(f - w) < 1e-6 for f, w in zip(freqs, [1.0, 2.0])), freqs

    forcing = json.dumps({"kind": "sine", "vector": [[1, 0], [0, 0]], "frequency": 1.5})
    ts, states = ox.simulate(ONE_CHANNEL, forcing, 0.01, 1.0)
    assert len(ts) == 101 and len(states[0]) == 4
    ts, states = ox.simulate(ONE_CHANNEL, forcing, 0.01, 1.0, mode="open")
    assert len(states[0]) == 2
    assert ox.equivalence(ONE_CHANNEL, forcing, 0.005, 2.0) < 1e-4

    lat = json.loads(ox.lattice(1, 4, 3, [[0, 0, 1]]))["result"]
    assert lat["frozen_dim_complex"] == 18 and lat["satisfied"]

    try:
        ox.decompose("{")
    except ValueError:
        pass
    else:
        raise AssertionError("malformed input accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
