"""Smoke test for the nematic_py extension.

Build with `cargo build --release -p nematic-py`, copy
target/release/libnematic_py.so next to this file as nematic_py.so
(or put it on PYTHONPATH), then run `python smoke_test.py`.
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import nematic_py as nm

CONFIG = """
gamma = 1
L = 0.01
theta = 1
kappa = 1
nu = 0.1
lambda = 1
n = 16
dt = 1e-3
T = 0.05
"""


def main():
    value, grad = nm.psi(2, [0.0, 0.0])
    assert abs(value + math.log(2 * math.pi)) < 1e-8, value
    assert max(abs(g) for g in grad) < 1e-12

    try:
        nm.psi(2, [0.6, 0.0])
    except RuntimeError:
        pass
    else:
        raise AssertionError("non-physical Q must raise")

    far = [3.0, -1.0]
    assert math.isfinite(nm.moreau_yosida(2, far, 16.0)[0])
    assert math.isfinite(nm.mollified(2, far, 8)[0])
    assert nm.margin(2, far) < 0

    cfg = json.loads(nm.parse_config(CONFIG))
    assert cfg["n"] == 16 and cfg["n_reg"] == 16

    measured, analytic, err = nm.taylor_green(0.1, 0.2, 16, 1e-3)
    assert err < 1e-6, (measured, analytic)

    sim = nm.Simulation(CONFIG)
    e0 = sim.record()["E"]
    sim.step(20)
    rec = sim.record()
    assert abs(sim.t - 0.02) < 1e-12
    assert rec["E"] <= e0 + 1e-8 * abs(e0)
    assert sim.min_margin() > 0
    assert len(sim.q()) == 2 and len(sim.q()[0]) == 16 * 16

    checks = nm.run_verify("spectral")
    assert all(passed for _, passed, _ in checks), checks

    print("smoke test ok: E %.6f -> %.6f, margin %.3f" % (e0, rec["E"], sim.min_margin()))


if __name__ == "__main__":
    main()
