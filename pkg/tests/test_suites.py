import json
import math

import numpy as np
import pytest

from dyadic_bump.suites import SUITES, ExperimentReport, _plain, run_suite


def test_plain_conversion():
    doc = _plain({"a": np.float64(1.5), "b": np.arange(3), "c": (np.int32(2), math.inf),
                  "d": np.bool_(True)})
    assert doc == {"a": 1.5, "b": [0, 1, 2], "c": [2, "inf"], "d": True}
    json.dumps(doc, allow_nan=False)


def test_report_pass_logic():
    rep = ExperimentReport("x", 0, {})
    assert rep.passed
    rep.verdict("ok", 1, 2, True)
    rep.verdict("bad", 3, 2, False)
    assert not rep.passed and rep.as_dict()["verdicts"][1]["name"] == "bad"


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_suite("nope")


def test_suites_deterministic_small():
    a = run_suite("holder", seed=3, trials=200).as_dict()
    b = run_suite("holder", seed=3, trials=200).as_dict()
    a.pop("wall_time"), b.pop("wall_time")
    assert a == b


def test_every_suite_is_registered():
    assert set(SUITES) == {"oracle", "duality", "holder", "maximal", "tau-scaling", "decay",
                           "carleson", "interp", "summation", "hilbert"}


def test_maximal_records_eta_sweep():
    rep = run_suite("maximal", seed=0, levels=(6, 8), pairs=2, n_f=4)
    assert any("0.3" in k for k in rep.constants)
