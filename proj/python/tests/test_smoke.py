import os
import pathlib

import pytest

import mma

STUDIES = pathlib.Path(os.environ.get("MMA_STUDIES_DIR", pathlib.Path(__file__).parents[2] / "studies"))


@pytest.fixture(scope="module")
def source():
    return (STUDIES / "diabetes-demo.study").read_text()


def test_validate(source):
    result = mma.validate(source)
    assert result["ok"]
    assert result["name"] == "diabetes-demo"
    assert result["fingerprint"] == mma.fingerprint(source)
    assert mma.fingerprint(mma.canonical(source)) == mma.fingerprint(source)


def test_validate_reports_positions(source):
    result = mma.validate(source.replace("when glucose > 125", "when pulse > 10"))
    assert not result["ok"]
    assert any(i["line"] == 7 and "pulse" in i["message"] for i in result["issues"])
    with pytest.raises(mma.Error) as err:
        mma.fingerprint("study")
    assert err.value.args[0] == "invalid_study"


def test_congruence_single_rule(source):
    rule = {
        "relevance": [{"feature": "glucose", "op": ">", "value": 125}],
        "satisfaction": [{"feature": "fatigue", "op": "==", "value": True}],
        "class": "diabetes",
        "direction": "more",
    }
    report = mma.congruence(source, [rule])
    assert report["element_recall"] == pytest.approx(0.5)
    assert report["element_precision"] == pytest.approx(1.0)
    assert report["relation_accuracy"] == pytest.approx(0.5)


def test_simulate_is_deterministic(source):
    a = mma.simulate(source, "perfect", "none", n=4, seed=3, threads=1)
    b = mma.simulate(source, "perfect", "none", n=4, seed=3, threads=2)
    assert a == b
    assert len(a["sessions"]) == 4
    assert all(row["pre"]["composite"] == pytest.approx(1.0) for row in a["sessions"])


def test_spearman():
    assert mma.spearman([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    assert mma.spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)


def test_service_round_trip(source, tmp_path):
    svc = mma.Service(tmp_path)
    status, body = svc.route("POST", "/api/studies", {"source": source})
    assert status == 201
    study_id = body["study_id"]
    status, body = svc.route("POST", "/api/sessions", {"study_id": study_id, "condition": "none", "seed": 1})
    assert status == 201
    assert svc.session_count == 1
    assert svc.route("GET", "/api/sessions/nope/step")[0] == 404
    assert svc.export_csv(study_id).startswith("session_id,")
    assert mma.Service(tmp_path).session_count == 1
