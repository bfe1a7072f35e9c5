import math
import os

import pytest

import nphinfer

DATA = os.path.join(os.environ.get("NPHINFER_DATA_DIR", os.path.join(os.path.dirname(__file__), "..", "..", "data")),
                    "pembro.csv")


@pytest.fixture(scope="module")
def pembro():
    return nphinfer.read_csv(DATA)


def test_example_analysis(pembro):
    res = nphinfer.analyze(pembro["time"], pembro["event"], pembro["group"],
                           ["S:2", "RMST:3.5"], draws=50000)
    assert abs(res["estimates"]["diff"][0] - 0.088) < 0.005
    assert abs(res["estimates"]["diff"][1] - 0.204) < 0.005
    assert res["ci"]["lower"][1] < res["ci"]["unadjusted"]["lower"][1]


def test_closed_test(pembro):
    res = nphinfer.analyze(pembro["time"], pembro["event"], pembro["group"],
                           ["score:3.5:less", "S:2:greater"], sided="one", alpha=0.025,
                           closed_test=True, draws=200000)
    p = res["tests"]["p_adj"]
    assert abs(p[0] - 0.0100) < 0.001
    assert abs(p[1] - 0.0082) < 0.001


def test_estimate_and_truth():
    d = nphinfer.simulate_trial(4, 500, seed=3)
    assert len(d["time"]) == 1000
    est = nphinfer.estimate(d["time"], d["event"], d["group"], "S:1")
    assert abs(est["theta"] - nphinfer.true_value(4, "S:1")) < 0.1
    assert math.isnan(nphinfer.true_value(4, "score:3"))
    assert nphinfer.true_value(4, "score:3", null=True) == 0.0


def test_study():
    s = nphinfer.run_study(4, nphinfer.parameter_set(7), n=80, reps=5, draws=2000)
    assert s["n_used"] + s["n_excluded"] == 5
    assert [r["label"] for r in s["specs"]] == ["score(3)", "avgHR(3)", "RMST(3)"]


def test_errors(pembro):
    with pytest.raises(nphinfer.NphError):
        nphinfer.analyze(pembro["time"], pembro["event"], pembro["group"], ["S:10"], draws=1000)
    with pytest.raises(nphinfer.NphError):
        nphinfer.true_value(9, "S:1")
