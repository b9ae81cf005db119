"""Smoke test for the `chb` extension module.

Build it with `cargo build --release -p chb-python`, then either install it
with maturin or put a copy of target/release/libchb.so named chb.so on
PYTHONPATH:

    cp target/release/libchb.so python/chb.so
    python3 python/smoke_test.py
"""

import json
import math
import sys
import tempfile
from pathlib import Path

import chb


def main():
    report = chb.validate_default()
    assert report.passed, str(report)

    grid = chb.Grid(16)
    assert (grid.nx, grid.ny) == (16, 16) and math.isclose(grid.dx, 1 / 16)

    sim = chb.Simulation(16, dt=1e-3)
    diags = sim.advance(5)
    assert sim.steps == 5 and math.isclose(sim.t, 5e-3)
    assert all(math.isfinite(d["energy"]) for d in diags)
    assert len(sim.phi) == 16 and len(sim.phi[0]) == 16

    spin = chb.Simulation(16, dt=1e-4, spinodal=True)
    energies = [d["energy"] for d in spin.advance(10)]
    assert all(b <= a for a, b in zip(energies, energies[1:])), energies

    nutrient = chb.mms("nutrient", levels=3)
    assert nutrient["slope"] >= 1.9, nutrient

    robin = chb.robin_limit([10.0, 100.0, 1000.0], n=16)
    assert robin["monotonic"], robin

    try:
        chb.Config.from_json('{"grid": {"nx": 8, "ny": 8}, "viscocity": 1}')
    except ValueError as e:
        assert "viscocity" in str(e)
    else:
        raise AssertionError("unknown key accepted")

    cfg = chb.Config.from_json(json.dumps({
        "grid": {"nx": 8, "ny": 8},
        "stepping": {"dt": 1e-3, "n_steps": 3},
    }))
    assert cfg.validate().passed
    with tempfile.TemporaryDirectory() as out:
        summary = cfg.run(out_dir=out)
        assert summary["steps"] == 3
        lines = Path(summary["diagnostics_path"]).read_text().splitlines()
        assert lines[0].startswith("step,t,energy") and len(lines) == 4

    print("chb smoke test: ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
