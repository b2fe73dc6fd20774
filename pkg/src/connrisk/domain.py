"""Core record types, per-stage feature schemas and deterministic feature transforms.

Conventions used throughout the package:

* timestamps are integer minutes since 2019-01-01T00:00 (``EPOCH``),
* day-of-week is encoded 0=Monday .. 6=Sunday,
* a missing optional value is represented by ``None``.
"""
from __future__ import annotations

import datetime
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

EPOCH = datetime.datetime(2019, 1, 1)

SEX_TOKENS = ("F", "M", "unknown")


class TrafficNetwork(str, Enum):
    """Schengen classification of the (origin, destination) pair.

    First letter: origin inside Schengen (S) or not (N); second letter:
    destination. Border control is required when crossing the Schengen
    boundary, which is what makes this feature operationally relevant.
    """

    SS = "SS"
    SN = "SN"
    NS = "NS"
    NN = "NN"


class DsmStage(str, Enum):
    """The four decision-support stages, ordered by information availability."""

    STRATEGIC = "strategic"
    PRE_TACTICAL = "pre-tactical"
    TACTICAL = "tactical"
    POST_OPERATIONS = "post-operations"


def traffic_network(origin_schengen: bool, destination_schengen: bool) -> TrafficNetwork:
    """Classify a connection by the Schengen membership of its endpoints."""
    if origin_schengen:
        return TrafficNetwork.SS if destination_schengen else TrafficNetwork.SN
    return TrafficNetwork.NS if destination_schengen else TrafficNetwork.NN


# Canonical feature names. These are also the CSV column headers, see
# docs/schema.md.
TP_FROM = "TP From"
TP_TO = "TP To"
TRAFFIC_NETWORK = "Traffic Network"
DEP_DAY = "Dep. Day"
DEP_MONTH_DAY = "Dep. Month Day"
BOARDING_DELTA = "Boarding Delta"
N_BUS = "N Bus"
SEX = "Sex"
AGE = "Age"
IS_GROUP = "Is Group"
CLASS_FROM = "Class From"
CLASS_TO = "Class To"
SCH_CONN_TIME = "Sch. Conn. Time"
PERCEIVED_CONN_TIME = "Perceived Conn. Time"
ACTUAL_CONN_TIME = "Actual Conn. Time"

CONNECTION_TIME_FEATURES = (SCH_CONN_TIME, PERCEIVED_CONN_TIME, ACTUAL_CONN_TIME)

#: Features encoded with target encoding; everything else is numeric.
CATEGORICAL_FEATURES = frozenset({TP_FROM, TP_TO, TRAFFIC_NETWORK, SEX, CLASS_FROM, CLASS_TO})

_STAGE_FEATURES = {
    DsmStage.STRATEGIC: (
        TP_FROM, TP_TO, TRAFFIC_NETWORK, DEP_DAY, DEP_MONTH_DAY,
        SCH_CONN_TIME,
    ),
    DsmStage.PRE_TACTICAL: (
        TP_FROM, TP_TO, TRAFFIC_NETWORK, DEP_DAY, DEP_MONTH_DAY,
        SEX, AGE, IS_GROUP, CLASS_FROM, CLASS_TO,
        SCH_CONN_TIME,
    ),
    DsmStage.TACTICAL: (
        TP_FROM, TP_TO, TRAFFIC_NETWORK, DEP_DAY, DEP_MONTH_DAY,
        SEX, AGE, IS_GROUP, CLASS_FROM, CLASS_TO,
        PERCEIVED_CONN_TIME,
    ),
    DsmStage.POST_OPERATIONS: (
        TP_FROM, TP_TO, TRAFFIC_NETWORK, DEP_DAY, DEP_MONTH_DAY,
        BOARDING_DELTA, N_BUS,
        SEX, AGE, IS_GROUP, CLASS_FROM, CLASS_TO,
        ACTUAL_CONN_TIME,
    ),
}


def stage_features(stage: DsmStage) -> tuple[str, ...]:
    """Ordered feature schema for one stage.

    Later stages extend earlier ones; the connection-time column switches
    from scheduled to perceived to actual as better timing information
    becomes available.
    """
    return _STAGE_FEATURES[DsmStage(stage)]


def stage_time_feature(stage: DsmStage) -> str:
    """The connection-time feature a stage (and its baseline) observes."""
    stage = DsmStage(stage)
    if stage in (DsmStage.STRATEGIC, DsmStage.PRE_TACTICAL):
        return SCH_CONN_TIME
    if stage is DsmStage.TACTICAL:
        return PERCEIVED_CONN_TIME
    return ACTUAL_CONN_TIME


@dataclass(frozen=True, slots=True)
class ConnectionRecord:
    """One passenger connection: flight pair, passenger, timing and label.

    Optional fields are ``None`` when the source data had no value; rows
    with missing values among a stage's required features are removed by
    listwise deletion before modelling.
    """

    arrival_flight_designator: str
    departure_flight_designator: str
    origin_schengen: bool
    destination_schengen: bool
    departure_weekday: int
    departure_month_day: int
    scheduled_on_blocks: int
    scheduled_off_blocks: int
    missed: bool
    actual_on_blocks: Optional[int] = None
    actual_off_blocks: Optional[int] = None
    sex: Optional[str] = None
    age: Optional[int] = None
    is_group: Optional[bool] = None
    class_from: Optional[str] = None
    class_to: Optional[str] = None
    boarding_delta: Optional[int] = None
    n_bus: Optional[int] = None

    def __post_init__(self):
        if not 0 <= self.departure_weekday <= 6:
            raise ValueError(f"departure_weekday {self.departure_weekday} outside [0, 6]")
        if not 1 <= self.departure_month_day <= 31:
            raise ValueError(f"departure_month_day {self.departure_month_day} outside [1, 31]")
        if self.age is not None and not 0 <= self.age <= 120:
            raise ValueError(f"age {self.age} outside [0, 120]")
        if self.sex is not None and self.sex not in SEX_TOKENS:
            raise ValueError(f"sex {self.sex!r} not one of {SEX_TOKENS}")
        if self.boarding_delta is not None and self.boarding_delta < 0:
            raise ValueError("boarding_delta must be >= 0")
        if self.n_bus is not None and self.n_bus < 0:
            raise ValueError("n_bus must be >= 0")

    @property
    def network(self) -> TrafficNetwork:
        return traffic_network(self.origin_schengen, self.destination_schengen)


@dataclass(frozen=True, slots=True)
class ConnectionTimes:
    """Connection intervals in integer minutes; ``None`` when a timestamp is missing."""

    scheduled: Optional[int]
    perceived: Optional[int]
    actual: Optional[int]


def connection_times(record: ConnectionRecord) -> ConnectionTimes:
    """Derive the three connection-time views of one record.

    scheduled: planned departure off-blocks minus planned arrival on-blocks.
    perceived: planned departure off-blocks minus the actual arrival
        on-blocks, i.e. the margin the passenger believes they have.
    actual:    realised interval between on-blocks and off-blocks.

    Perceived and actual may be negative when the arrival lands after the
    (scheduled) departure; negative values are kept, not clamped.
    """
    scheduled = record.scheduled_off_blocks - record.scheduled_on_blocks
    perceived = None
    actual = None
    if record.actual_on_blocks is not None:
        perceived = record.scheduled_off_blocks - record.actual_on_blocks
        if record.actual_off_blocks is not None:
            actual = record.actual_off_blocks - record.actual_on_blocks
    return ConnectionTimes(scheduled=scheduled, perceived=perceived, actual=actual)


def feature_value(record: ConnectionRecord, feature: str):
    """Raw value of one canonical feature for one record.

    Categorical features yield their token, numeric features a float,
    missing values ``None``.
    """
    if feature == TP_FROM:
        return record.arrival_flight_designator
    if feature == TP_TO:
        return record.departure_flight_designator
    if feature == TRAFFIC_NETWORK:
        return record.network.value
    if feature == DEP_DAY:
        return float(record.departure_weekday)
    if feature == DEP_MONTH_DAY:
        return float(record.departure_month_day)
    if feature == SEX:
        return record.sex
    if feature == AGE:
        return None if record.age is None else float(record.age)
    if feature == IS_GROUP:
        return None if record.is_group is None else float(record.is_group)
    if feature == CLASS_FROM:
        return record.class_from
    if feature == CLASS_TO:
        return record.class_to
    if feature == BOARDING_DELTA:
        return None if record.boarding_delta is None else float(record.boarding_delta)
    if feature == N_BUS:
        return None if record.n_bus is None else float(record.n_bus)
    if feature in CONNECTION_TIME_FEATURES:
        times = connection_times(record)
        value = {
            SCH_CONN_TIME: times.scheduled,
            PERCEIVED_CONN_TIME: times.perceived,
            ACTUAL_CONN_TIME: times.actual,
        }[feature]
        return None if value is None else float(value)
    raise KeyError(f"unknown feature {feature!r}")


def feature_frame(records: Sequence[ConnectionRecord], features: Sequence[str]) -> dict[str, list]:
    """Column-wise raw view of records restricted to ``features``."""
    frame: dict[str, list] = {f: [] for f in features}
    for record in records:
        for f in features:
            frame[f].append(feature_value(record, f))
    return frame


@dataclass(frozen=True)
class ColumnMeta:
    name: str
    kind: str  # "numeric" | "categorical-encoded"


@dataclass(frozen=True)
class Dataset:
    """Encoded feature matrix plus labels; the unit handed to model training.

    ``row_ids`` track provenance through splits and oversampling so leakage
    checks can assert that no test row ever reaches a fitting step.
    """

    X: np.ndarray
    columns: tuple[ColumnMeta, ...]
    y: np.ndarray
    row_ids: np.ndarray

    def __post_init__(self):
        n = self.X.shape[0]
        if self.X.ndim != 2 or self.X.shape[1] != len(self.columns):
            raise ValueError("X shape does not match column metadata")
        if self.y.shape != (n,) or self.row_ids.shape != (n,):
            raise ValueError("labels/row_ids length does not match X")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("dataset contains non-finite values; run listwise deletion first")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)


def minutes_to_iso(minutes: int) -> str:
    """Render a minutes-since-epoch timestamp as an ISO-8601 minute string."""
    return (EPOCH + datetime.timedelta(minutes=int(minutes))).strftime("%Y-%m-%dT%H:%M")


def iso_to_minutes(text: str) -> int:
    """Parse an ISO-8601 timestamp (or a bare integer) to minutes since epoch."""
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    stamp = datetime.datetime.fromisoformat(text)
    delta = stamp - EPOCH
    return int(round(delta.total_seconds() / 60.0))
