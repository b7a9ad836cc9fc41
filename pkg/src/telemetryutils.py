"""
telemetryutils.py

Per-step telemetry of a run (EpisodeLog), its CSV and JSON emission,
and the run summary.

CSV layout:

```
# ctcs-hrrl v1
# seed=7 config_hash=... code_version=0.1.0 grad_clip=10.0
k,clock,level_1,level_2,f_m,f_s,drive,reward,loss_f,loss_j,action,explored,pos_x,pos_y
1,0.01,...
```
"""

####################
# Standard libraries
####################
import json
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List

#######################
# Third party libraries
#######################
import numpy as np
import pandas as pd

#################
# Local libraries
#################
from constants import HRRL_CSV_SCHEMA
from contracts import require
from logutils import verbose_log


@dataclass(frozen=True)
class StepRecord:
    """One simulation step; levels and position are read after the step"""

    k: int
    clock: float
    level_1: float
    level_2: float
    f_m: float
    f_s: float
    drive: float
    reward: float
    loss_f: float
    loss_j: float
    action: str
    explored: bool
    pos_x: float
    pos_y: float


COLUMNS = tuple(f.name for f in fields(StepRecord))


@dataclass
class EpisodeLog:
    """Ordered step records plus run metadata"""

    records: List[StepRecord] = field(default_factory=list)
    metadata: Dict[str, object] = field(default_factory=dict)
    first_index: int = 1

    def __len__(self) -> int:
        return len(self.records)

    @property
    def next_index(self) -> int:
        """Step index the next record must carry"""
        return self.records[-1].k + 1 if self.records else self.first_index

    def record(self, step_record: StepRecord) -> "EpisodeLog":
        """Append a record; its index must follow the last one"""
        require(
            step_record.k == self.next_index,
            f"out of order step index {step_record.k}, expected {self.next_index}",
        )
        self.records.append(step_record)
        return self

    def column(self, name: str) -> np.ndarray:
        """One column as an array"""
        require(name in COLUMNS, f"unknown column {name}")
        return np.array([getattr(r, name) for r in self.records])

    def to_frame(self) -> pd.DataFrame:
        """Records as a DataFrame in the fixed column order"""
        return _frame(self.records)


def _frame(records: List[StepRecord]) -> pd.DataFrame:
    frame = pd.DataFrame([asdict(r) for r in records], columns=list(COLUMNS))
    frame["explored"] = frame["explored"].astype(int)
    return frame


def _metadata_line(metadata: Dict[str, object]) -> str:
    return "# " + " ".join(f"{key}={metadata[key]}" for key in sorted(metadata))


def emit_csv(log: EpisodeLog, path, verbose: bool = False):
    """
    Write the log as CSV: schema line, metadata line, header, one row per
    record. Floats keep 9 significant digits; lines end with LF.
    """
    try:
        with open(path, mode="w", encoding="utf-8", newline="") as csv_file:
            csv_file.write(f"{HRRL_CSV_SCHEMA}\n")
            csv_file.write(f"{_metadata_line(log.metadata)}\n")
            log.to_frame().to_csv(
                csv_file, index=False, float_format="%.9g", lineterminator="\n"
            )
    except OSError as exc:
        raise OSError(f"Unable to write telemetry file: {path}") from exc

    if verbose:
        verbose_log(f"Saved telemetry ({len(log)} steps): {path}")


class CsvSink:
    """
    Streams records into the `emit_csv` layout, in chunks of `chunk`
    rows; the finished file is byte-identical to `emit_csv` of the same
    log. Use it as the `sink` of a run.
    """

    def __init__(self, path, metadata: Dict[str, object], chunk: int = 1000):
        require(chunk >= 1, f"chunk must be >= 1, got {chunk}")
        self.path = path
        self.chunk = chunk
        self.written = 0
        self._pending: List[StepRecord] = []
        try:
            with open(path, mode="w", encoding="utf-8", newline="") as csv_file:
                csv_file.write(f"{HRRL_CSV_SCHEMA}\n")
                csv_file.write(f"{_metadata_line(metadata)}\n")
                _frame([]).to_csv(csv_file, index=False, lineterminator="\n")
        except OSError as exc:
            raise OSError(f"Unable to write telemetry file: {path}") from exc

    def __call__(self, step_record: StepRecord):
        self._pending.append(step_record)
        if len(self._pending) >= self.chunk:
            self.flush()

    def flush(self):
        """Append the pending rows"""
        if not self._pending:
            return
        try:
            with open(self.path, mode="a", encoding="utf-8", newline="") as csv_file:
                _frame(self._pending).to_csv(
                    csv_file, index=False, header=False, float_format="%.9g", lineterminator="\n"
                )
        except OSError as exc:
            raise OSError(f"Unable to write telemetry file: {self.path}") from exc
        self.written += len(self._pending)
        self._pending = []


def _parse_metadata(line: str) -> Dict[str, object]:
    metadata = {}
    for item in line.lstrip("#").split():
        key, _, value = item.partition("=")
        metadata[key] = value
    return metadata


def read_csv(path) -> EpisodeLog:
    """Parse a file written by `emit_csv` back into an EpisodeLog"""
    try:
        with open(path, mode="r", encoding="utf-8") as csv_file:
            schema = csv_file.readline().rstrip("\n")
            metadata_line = csv_file.readline().rstrip("\n")
            frame = pd.read_csv(csv_file, dtype={"action": str})
    except OSError as exc:
        raise OSError(f"Unable to read telemetry file: {path}") from exc
    require(schema == HRRL_CSV_SCHEMA, f"{path}: unsupported schema line {schema!r}")
    require(list(frame.columns) == list(COLUMNS), f"{path}: unexpected columns")

    records = [
        StepRecord(
            k=int(row.k),
            clock=float(row.clock),
            level_1=float(row.level_1),
            level_2=float(row.level_2),
            f_m=float(row.f_m),
            f_s=float(row.f_s),
            drive=float(row.drive),
            reward=float(row.reward),
            loss_f=float(row.loss_f),
            loss_j=float(row.loss_j),
            action=str(row.action),
            explored=bool(row.explored),
            pos_x=float(row.pos_x),
            pos_y=float(row.pos_y),
        )
        for row in frame.itertuples(index=False)
    ]
    first_index = records[0].k if records else 1
    return EpisodeLog(records, _parse_metadata(metadata_line), first_index)


def sleep_bout_violations(log: EpisodeLog, min_steps: int) -> int:
    """
    Count finished sleep bouts shorter than `min_steps`. A bout still
    running at the end of the log is not finished.
    """
    violations = 0
    length = 0
    for step_record in log.records:
        if step_record.action == "SLEEP":
            length += 1
            continue
        if 0 < length < min_steps:
            violations += 1
        length = 0
    return violations


def _window_mean(values: np.ndarray, start: int, stop: int):
    window = values[max(start, 0):stop]
    return float(np.mean(window)) if window.size else None


def _window_median(values: np.ndarray, start: int, stop: int):
    window = values[max(start, 0):stop]
    return float(np.median(window)) if window.size else None


def summarize(log: EpisodeLog, step_violations: int, min_sleep_steps: int) -> Dict[str, object]:
    """
    Run summary: explored fraction, first/final 10% windows of the drive
    and resource levels, L_J medians, constraint violations (must be 0).
    """
    count = len(log)
    tenth = max(1, count // 10) if count else 0
    drive = log.column("drive").astype(float)
    level_1 = log.column("level_1").astype(float)
    level_2 = log.column("level_2").astype(float)
    loss_j = log.column("loss_j").astype(float)
    violations = step_violations + sleep_bout_violations(log, min_sleep_steps)
    return {
        "seed": log.metadata.get("seed"),
        "iterations": count,
        "config_hash": log.metadata.get("config_hash"),
        "code_version": log.metadata.get("code_version"),
        "explored_fraction": float(np.mean(log.column("explored"))) if count else 0.0,
        "initial_mean_drive": _window_mean(drive, 0, tenth),
        "final_mean_drive": _window_mean(drive, count - tenth, count),
        "final_mean_level_1": _window_mean(level_1, count - tenth, count),
        "final_mean_level_2": _window_mean(level_2, count - tenth, count),
        "median_loss_j_early": _window_median(loss_j, 1000, 3000),
        "median_loss_j_final": _window_median(loss_j, count - max(1, count // 5), count),
        "constraint_violations": int(violations),
    }


def emit_summary(summary: Dict[str, object], path, verbose: bool = False):
    """Write the summary as sorted, indented JSON"""
    try:
        with open(path, mode="w", encoding="utf-8") as summary_file:
            json.dump(summary, summary_file, indent=2, sort_keys=True)
            summary_file.write("\n")
    except OSError as exc:
        raise OSError(f"Unable to write summary file: {path}") from exc

    if verbose:
        verbose_log(f"Saved summary: {path}")
