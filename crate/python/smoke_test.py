#!/usr/bin/env python3
"""Smoke test for the shuntlab_py extension module.

Build the module first:

    cargo build --release -p shuntlab-py

The script locates the cdylib in target/{release,debug}, exposes it under
the importable name, and exercises the main types and operations.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path


def locate_module() -> Path:
    root = Path(__file__).resolve().parent.parent
    candidates = [
        root / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libshuntlab_py.so", "shuntlab_py.so", "libshuntlab_py.dylib")
    ]
    for c in candidates:
        if c.exists():
            return c
    sys.exit("shuntlab_py cdylib not found; run `cargo build --release -p shuntlab-py` first")


def import_module():
    lib = locate_module()
    tmp = Path(tempfile.mkdtemp(prefix="shuntlab_py_"))
    suffix = ".so" if lib.suffix != ".dylib" else ".so"
    shutil.copy2(lib, tmp / f"shuntlab_py{suffix}")
    sys.path.insert(0, str(tmp))
    import shuntlab_py

    return shuntlab_py


def approx(a, b, rel):
    assert abs(a - b) <= rel * abs(b), f"{a} vs {b} (rel {abs(a - b) / abs(b):.2e})"


def main():
    sl = import_module()

    # Experimental-beam tuning.
    model = sl.Model.from_hertz(31.08, 31.29, 245e-9)
    approx(model.kc, 0.116, 5e-3)
    shunt = sl.tune_series_rl(model)
    approx(shunt.inductance, 105.7, 5e-3)
    approx(shunt.resistance, 2961.0, 1e-2)

    # Coupling factor helper.
    approx(sl.eemcf(1.0, math.sqrt(1.01)), 0.1, 1e-9)

    # Critical sampling period of the beam: about 1.3 ms by both routes.
    crit = sl.critical_delay_numeric(model, shunt, "zoh")
    approx(crit["tau_c"], 1.3e-3, 0.03)
    series = sl.critical_delay_series(model.kc, model.omega_sc)
    approx(series["tau_c"], crit["tau_c"], 0.02)

    # Normalized plant: equal peaks of the closed-loop response.
    nm = sl.Model.normalized(0.1)
    ns = sl.tune_series_rl(nm)
    y = sl.shunt_admittance(ns)
    frf = sl.closed_loop_frf(nm, y, "none", 0.0, 0.8, 1.2, 4000)
    peaks = frf["peaks"]
    assert len(peaks) == 2, peaks
    approx(peaks[0][1], peaks[1][1], 0.01)

    # Margins: three crossovers, finite phase margin, infinite gain margin.
    rep = sl.stability_margins(nm, ns)
    assert len(rep["gain_crossovers"]) == 3
    assert rep["gain_margin_db"] is None
    assert 0.0 < rep["phase_margin_deg"] < 90.0

    # Stable nominal poles satisfying the characteristic equation.
    poles = sl.nominal_poles(nm, ns)
    assert len(poles) == 4 and all(p.real < 0 for p in poles)

    # Delay anticipation keeps the delayed loop stable beyond tau_c.
    out = sl.stabilize(nm, y, 0.3)
    assert out["stable"], out
    assert max(out["pole_displacements"]) < 0.05

    # Discretization round trip: DC gain match.
    d = sl.tustin_discretize(y, 0.2)
    dc = d.eval_z(complex(1.0, 0.0))
    approx(dc.real, 1.0 / ns.resistance, 1e-9)

    # Short swept-sine run of the sampled loop stays stable below tau_c.
    sim = sl.simulate_swept_sine(
        nm, y, 0.1, 0.9 / math.tau, 1.15 / math.tau, 300.0 * math.tau
    )
    assert sim["stable"]
    assert len(sim["envelope"]) > 10

    print("shuntlab_py smoke test: all checks passed")


if __name__ == "__main__":
    main()
