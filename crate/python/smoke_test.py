"""Smoke test for the bianchi_py extension module.

Build and install first, e.g. ``pip install --no-build-isolation ./crates/python``.
"""

import json
import math

import bianchi_py as bp


def main():
    ident = bp.CurvatureOperator.identity(3)
    assert ident.n == 3
    assert math.isclose(ident.scalar(), 3.0)
    phi = ident.phi()
    assert all(math.isclose(x, 2.0) for x in phi.eigenvalues())

    for n in range(3, 7):
        sharp = bp.CurvatureOperator.identity(n).sharp()
        assert all(abs(x - (n - 2)) < 1e-10 for x in sharp.eigenvalues()), n

    d = bp.CurvatureOperator.diagonal(3, [0.0, 0.0, 1.0])
    assert d.phi().matrix() == d.matrix()
    assert bp.eigen_ode_rhs([1.0, 1.0, 1.0]) == [2.0, 2.0, 2.0]
    assert bp.bianchi_tuple_dimension(3) == 15
    assert abs(bp.b_formula(0.35, 1.0) - 16.4933) < 1e-4
    try:
        bp.b_formula(1.0 / 3.0, 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("a = 1/3 must be rejected")

    times, states, term = bp.integrate(ident * 1.0, 0.45)
    c = 1.0 / (1.0 - 2.0 * times[-1])
    assert abs(states[-1].eigenvalues()[0] - c) < 1e-6 * c, term

    w = bp.nonconvexity_witness(0.35, 1.0)
    assert w["margin_midpoint"] > 1e-3

    rep = bp.cross_validate(0.35, 1.0, samples=100)
    assert rep["agreement"]["verdict"] == "agree-pass"

    code, report = bp.run_command(json.dumps({"command": "calibrate", "seed": 42}))
    assert code == 0 and report["status"] == "PASS"
    code, report = bp.run_command(json.dumps({"command": "check-bianchi-eigen", "a": 0.45, "samples": 200}))
    assert code == 2 and report["status"] == "FAIL"
    print("smoke test passed")


if __name__ == "__main__":
    main()
