import pytest

from klm3d.errors import JoinError, ParseError, SchemaError
from klm3d.logs import join_predictions, predictions_index, read_trial_log, write_trial_log
from klm3d.scenario import generate_menu_scenario, predict_scenario
from klm3d.simulate import NoiseSpec, simulate_logs
from klm3d.stats import TrialRecord

SCEN = generate_menu_scenario("Controller")
RECS = simulate_logs(SCEN, NoiseSpec("gaussian", scale=0.1, failure_rate=0.2), seed=5, participants=2)


@pytest.mark.parametrize("name", ["log.csv", "log.jsonl"])
def test_round_trip(tmp_path, name):
    path = tmp_path / name
    write_trial_log(path, RECS)
    assert read_trial_log(path) == RECS
    first = path.read_bytes()
    write_trial_log(path, read_trial_log(path))
    assert path.read_bytes() == first


def test_minimal_csv(tmp_path):
    path = tmp_path / "log.csv"
    path.write_text("participant_id,modality,trial_id,actual_total\nP1,Hand,3,812.5\n")
    (r,) = read_trial_log(path)
    assert r == TrialRecord("P1", "Hand", "3", 812.5)


def test_bad_number_names_line_and_field(tmp_path):
    path = tmp_path / "log.csv"
    path.write_text("participant_id,modality,trial_id,actual_total\nP1,Hand,1,800\nP1,Hand,2,fast\n")
    with pytest.raises(SchemaError, match=r"log\.csv:3.*actual_total"):
        read_trial_log(path)


def test_missing_column(tmp_path):
    path = tmp_path / "log.csv"
    path.write_text("participant_id,modality,actual_total\nP1,Hand,800\n")
    with pytest.raises(SchemaError, match="trial_id"):
        read_trial_log(path)


def test_bad_jsonl(tmp_path):
    path = tmp_path / "log.jsonl"
    path.write_text('{"participant_id": "P1", "modality": "Hand", "trial_id": 1, "actual_total": 5}\n{oops\n')
    with pytest.raises(ParseError, match="line 1, column 2"):
        read_trial_log(path)


def test_missing_file(tmp_path):
    with pytest.raises(ParseError):
        read_trial_log(tmp_path / "absent.csv")


def test_join():
    bare = [TrialRecord(r.participant_id, r.modality, r.trial_id, r.actual_total) for r in RECS]
    index = predictions_index([predict_scenario(SCEN).to_dict()])
    joined = join_predictions(bare, index)
    assert [r.predicted_total for r in joined] == [r.predicted_total for r in RECS]


def test_participant_specific_prediction_wins():
    doc = {"modality": "Hand", "trials": [{"id": 1, "total": 500.0},
                                          {"id": 1, "total": 700.0, "participant_id": "P2"}]}
    index = predictions_index([doc])
    recs = [TrialRecord("P1", "Hand", "1", 600.0), TrialRecord("P2", "Hand", "1", 600.0)]
    assert [r.predicted_total for r in join_predictions(recs, index)] == [500.0, 700.0]


def test_join_reports_unmatched():
    index = predictions_index([predict_scenario(SCEN).to_dict()])
    recs = [TrialRecord("P1", "Controller", "99", 600.0), TrialRecord("P1", "Hand", "1", 600.0)]
    with pytest.raises(JoinError) as info:
        join_predictions(recs, index)
    assert info.value.unmatched == [("P1", "Controller", "99"), ("P1", "Hand", "1")]
    assert info.value.exit_code == 3
