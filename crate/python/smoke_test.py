#!/usr/bin/env python3
"""Smoke test for the ergodicity_lab_py extension module.

Builds nothing itself: compile the module first with

    cargo build -p ergodicity-lab-py --release

then run `python3 python/smoke_test.py` from the repository root.
"""
import math
import shutil
import sys
import tempfile
from pathlib import Path


def locate_extension():
    root = Path(__file__).resolve().parent.parent
    candidates = []
    for profile in ("release", "debug"):
        for stem in ("libergodicity_lab_py.so", "ergodicity_lab_py.dll",
                     "libergodicity_lab_py.dylib"):
            candidates.append(root / "target" / profile / stem)
    for cand in candidates:
        if cand.exists():
            return cand
    sys.exit("extension not built; run: cargo build -p ergodicity-lab-py --release")


def import_extension():
    src = locate_extension()
    tmp = Path(tempfile.mkdtemp(prefix="ergodicity-lab-py-"))
    dst = tmp / "ergodicity_lab_py.so"
    shutil.copy2(src, dst)
    sys.path.insert(0, str(tmp))
    import ergodicity_lab_py
    return ergodicity_lab_py


def main():
    lab = import_extension()

    # Legendre transform of (1/m)|p|^m at m=3, q=1 is 2/3
    assert abs(lab.legendre_power(3.0, [1.0]) - 2.0 / 3.0) < 1e-12

    # eikonal landscape: critical value 0, Mather measure rests at the origin
    prob = lab.Problem.gallery("eikonal_f", 1, 8)
    assert prob.num_points == 8 and prob.num_controls == 3
    assert prob.generator_is_monotone()

    erg = prob.solve_ergodic()
    assert abs(erg.c) < 1e-9, erg.c

    cert = prob.certify_ergodic()
    assert cert.gap <= 1e-8, cert.gap
    assert cert.closing_residual <= 1e-8
    assert len(cert.support) == 1 and cert.support[0][:2] == (0, 1)

    disc = prob.solve_discounted(0.1)
    dcert = prob.certify_discounted(4, 0.1)
    assert abs(dcert.lp_value - 0.1 * disc.v[4]) <= 1e-8

    sched = prob.run_schedule([2.0 ** -k for k in range(14)])
    assert sched.converged, sched.diagnostic
    assert sched.spreads[-1] <= 1e-3

    # round-trip through the spec document
    prob2 = lab.Problem.from_spec(prob.to_spec())
    erg2 = prob2.solve_ergodic()
    assert abs(erg2.c - erg.c) < 1e-12

    # condition (L) diagnostic on the coercive gallery
    visc = lab.Problem.gallery("viscous_superlinear", 1, 8)
    l0, outside_min, margin, ok = visc.check_condition_l()
    assert ok and margin > 0.0, (l0, outside_min, margin, ok)

    # invalid inputs surface as exceptions
    try:
        lab.Problem.gallery("no_such_gallery", 1, 8)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown gallery id must raise")

    print("smoke test passed: c=%.2e gap=%.2e landscape=%s" %
          (erg.c, cert.gap, math.isclose(sum(w for _, _, w in cert.support), 1.0)))


if __name__ == "__main__":
    main()
