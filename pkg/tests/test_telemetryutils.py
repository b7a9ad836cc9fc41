import json

import pytest

from contracts import ContractViolationError
from telemetryutils import (
    COLUMNS,
    CsvSink,
    EpisodeLog,
    emit_csv,
    emit_summary,
    read_csv,
    sleep_bout_violations,
    summarize,
)


def make_log(make_record, count, **metadata):
    log = EpisodeLog(metadata=metadata)
    for k in range(1, count + 1):
        log.record(
            make_record(
                k,
                drive=10.0 - 0.1 * k,
                level_1=0.1 + 0.01 * k,
                loss_j=1.0 / k,
                explored=k % 4 == 0,
                reward=0.123456789123,
            )
        )
    return log


def test_records_must_be_in_order(make_record):
    log = EpisodeLog()
    log.record(make_record(1))
    with pytest.raises(ContractViolationError):
        log.record(make_record(3))


def test_resumed_log_starts_later(make_record):
    log = EpisodeLog(first_index=6)
    assert log.next_index == 6
    log.record(make_record(6))
    assert log.next_index == 7


def test_csv_layout(make_record, tmp_path):
    path = tmp_path / "telemetry.csv"
    emit_csv(make_log(make_record, 3, seed=7, config_hash="abc"), str(path))
    lines = path.read_text(encoding="utf-8").split("\n")
    assert lines[0] == "# ctcs-hrrl v1"
    assert lines[1] == "# config_hash=abc seed=7"
    assert lines[2] == ",".join(COLUMNS)
    assert lines[3].startswith("1,0.01,0.11,0.1,0.1,0.1,9.9,0.123456789,")
    assert lines[-1] == ""


def test_csv_reads_back(make_record, tmp_path):
    path = tmp_path / "telemetry.csv"
    log = make_log(make_record, 5, seed=7)
    emit_csv(log, str(path))
    back = read_csv(str(path))
    assert back.metadata == {"seed": "7"}
    assert [r.k for r in back.records] == [1, 2, 3, 4, 5]
    assert [r.explored for r in back.records] == [r.explored for r in log.records]
    assert back.records[2].drive == pytest.approx(log.records[2].drive, rel=1e-8)
    assert back.records[0].action == "IDLE"


def test_empty_log_csv(tmp_path):
    path = tmp_path / "telemetry.csv"
    emit_csv(EpisodeLog(metadata={"seed": 0}), str(path))
    assert len(path.read_text(encoding="utf-8").splitlines()) == 3
    assert len(read_csv(str(path))) == 0


def test_sink_matches_emit_csv(make_record, tmp_path):
    log = make_log(make_record, 7, seed=1)
    emit_csv(log, str(tmp_path / "whole.csv"))
    sink = CsvSink(str(tmp_path / "streamed.csv"), log.metadata, chunk=3)
    for step_record in log.records:
        sink(step_record)
    assert sink.written == 6
    sink.flush()
    assert sink.written == 7
    assert (tmp_path / "streamed.csv").read_bytes() == (tmp_path / "whole.csv").read_bytes()


def test_unwritable_csv(make_record, tmp_path):
    with pytest.raises(OSError):
        emit_csv(make_log(make_record, 1), str(tmp_path / "missing" / "t.csv"))


def test_sleep_bout_violations(make_record):
    log = EpisodeLog()
    actions = ["SLEEP"] * 5 + ["IDLE"] + ["SLEEP"] * 10 + ["IDLE"] + ["SLEEP"] * 2
    for k, action in enumerate(actions, start=1):
        log.record(make_record(k, action=action))
    # the 5 step bout is short; the running bout at the end is not finished
    assert sleep_bout_violations(log, 10) == 1


def test_summary_windows(make_record):
    log = make_log(make_record, 20, seed=3, config_hash="h", code_version="0.1.0")
    summary = summarize(log, step_violations=0, min_sleep_steps=1000)
    assert summary["iterations"] == 20
    assert summary["seed"] == 3
    assert summary["explored_fraction"] == pytest.approx(0.25)
    assert summary["initial_mean_drive"] == pytest.approx((9.9 + 9.8) / 2)
    assert summary["final_mean_drive"] == pytest.approx((8.1 + 8.0) / 2)
    assert summary["final_mean_level_1"] == pytest.approx((0.29 + 0.30) / 2)
    assert summary["median_loss_j_early"] is None
    assert summary["median_loss_j_final"] == pytest.approx((1 / 18 + 1 / 19) / 2)
    assert summary["constraint_violations"] == 0


def test_summary_of_empty_log():
    summary = summarize(EpisodeLog(), step_violations=0, min_sleep_steps=1000)
    assert summary["iterations"] == 0
    assert summary["explored_fraction"] == 0.0
    assert summary["final_mean_drive"] is None


def test_summary_counts_violations(make_record):
    log = EpisodeLog()
    for k, action in enumerate(["SLEEP", "IDLE"], start=1):
        log.record(make_record(k, action=action))
    assert summarize(log, step_violations=2, min_sleep_steps=1000)["constraint_violations"] == 3


def test_emit_summary(tmp_path):
    path = tmp_path / "summary.json"
    emit_summary({"b": 1, "a": None}, str(path))
    text = path.read_text(encoding="utf-8")
    assert json.loads(text) == {"a": None, "b": 1}
    assert text.index('"a"') < text.index('"b"')
