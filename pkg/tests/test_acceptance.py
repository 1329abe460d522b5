"""End-to-end acceptance criteria, one suite each, at their pinned parameters.

Every test prints a ``PASS``/``FAIL`` line and records it for the terminal
summary (see ``conftest.py``), so the verdicts are visible without ``-s``.
"""
import pytest

from dyadic_bump.suites import run_suite

RESULTS = {}

# (criterion, suite, runtime budget in seconds, parameters)
CRITERIA = [
    (1, "oracle", 5, dict(L=10, trials=100, exponents=(1.5, 2.0, 3.0), rtol=1e-9)),
    (2, "duality", 5, dict(n_points=200, t_min=1e-6, t_max=1e6)),
    (3, "holder", 60, dict(trials=10_000, constant=2.0)),
    (4, "maximal", 300, dict(levels=(8, 10, 12), pairs=20, n_f=50, max_variation=0.25)),
    (5, "tau-scaling", 600, dict(L=10, taus=(1, 2, 3, 4, 5), shifts=30, max_slope=0.1)),
    (6, "decay", 300, dict(L=10, shifts=20, min_fraction=0.95, min_r2=0.8)),
    (7, "carleson", 120, dict(levels=(8, 10, 12), pairs=10, n_F=1000, max_variation=0.10)),
    (8, "interp", 120, dict(trials=10_000, cases=((2.0, 1.0), (3.0, 2.0)), homogeneity_tol=1e-9)),
    (9, "summation", 120, dict(L=10, pairs=20, p=2.0, delta=1.0)),
    (10, "hilbert", 300, dict(L=12, trials=1000, homogeneity_tol=1e-9)),
]


@pytest.mark.parametrize("number, name, budget, params", CRITERIA,
                         ids=[f"{n:02d}-{s}" for n, s, _, _ in CRITERIA])
def test_criterion(number, name, budget, params):
    rep = run_suite(name, seed=0, **params)
    ok = rep.passed and rep.wall_time < budget
    failed = [v["name"] for v in rep.verdicts if not v["passed"]]
    line = (f"criterion {number:2d} {name:<12s} {'PASS' if ok else 'FAIL'} "
            f"({rep.wall_time:.1f}s / {budget}s)" + (f" failed: {failed}" if failed else ""))
    RESULTS[number] = line
    print(line)
    for v in rep.verdicts:
        print(f"    {v['name']}: {v['value']} {v['relation']} {v['threshold']}")
    assert rep.verdicts, "suite produced no verdicts"
    assert rep.passed, failed
    assert rep.wall_time < budget
