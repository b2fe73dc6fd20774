"""Seeded synthetic hub-and-spoke connection data, CSV ingestion and listwise deletion.

The generator draws passenger connections whose missed-connection labels
come from a fixed logistic ground-truth model, so the qualitative structure
real operations data exhibits (connection-time dominance, border-control
risk ordering NS > NN > SN > SS, per-flight punctuality patterns, group
travel effects) is recoverable by the downstream models. All coefficients
are documented constants below; same config means byte-identical output.
"""
from __future__ import annotations

import csv
import datetime
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .domain import (
    AGE, BOARDING_DELTA, CLASS_FROM, CLASS_TO, DEP_DAY, DEP_MONTH_DAY, EPOCH, IS_GROUP,
    N_BUS, SEX, TP_FROM, TP_TO, ConnectionRecord, DsmStage, feature_value,
    iso_to_minutes, minutes_to_iso,
)

# --- ground-truth risk model -------------------------------------------------
# Log-odds contributions. The perceived-margin term is a steep saturating
# ramp: connections shorter than ~half an hour are near-certain misses,
# while extra margin beyond a couple of hours stops mattering. Its +-
# TIME_EFFECT span dominates every other contribution by design.
TIME_EFFECT = -5.5                   # log-odds at the short end vs the long end
TIME_CENTER = 55.0                   # minutes of perceived margin at the ramp midpoint
TIME_WIDTH = 28.0                    # minutes over which the ramp saturates
# Border control consumes connection margin: the ramp midpoint shifts by
# network, which is what makes a single global time threshold suboptimal.
NETWORK_EXTRA_MARGIN = {"NS": 18.0, "NN": 6.0, "SN": 3.0, "SS": -9.0}
NETWORK_EFFECTS = {"NS": 0.5, "NN": 0.15, "SN": 0.0, "SS": -0.25}
COEFF_AGE = 0.55                     # per AGE_SCALE years above AGE_CENTER
AGE_CENTER = 41.0
AGE_SCALE = 15.0
COEFF_GROUP = -0.75                  # groups shepherd each other to the gate
COEFF_BUS = 0.45                     # bus boarding closes gates earlier
COEFF_BOARDING = 0.12
BOARDING_CENTER = 25.0
BOARDING_SCALE = 8.0
FLIGHT_EFFECT_SD = 0.85              # per-designator random effects
LATENT_NOISE_SD = 0.35               # irreducible noise, scaled by noise_scale

# Arrival delays: a chronic per-flight component (recoverable from the
# designator) plus day-to-day noise that nothing at scheduling time predicts.
FLIGHT_BASE_DELAY_MEAN = 8.0
FLIGHT_BASE_DELAY_SD = 16.0
DELAY_NOISE_SD = 8.0


def ground_truth_logit(perceived, network_tokens, age, is_group, n_bus,
                       boarding_delta) -> np.ndarray:
    """Systematic part of the miss log-odds (flight effects and noise excluded).

    Monotone decreasing in perceived margin; the time term's span of
    2 * |TIME_EFFECT| log-odds exceeds every other coefficient.
    """
    tokens = np.asarray(network_tokens)
    net_effect = np.vectorize(NETWORK_EFFECTS.get)(tokens).astype(float)
    center = TIME_CENTER + np.vectorize(NETWORK_EXTRA_MARGIN.get)(tokens).astype(float)
    return (
        TIME_EFFECT * np.tanh((np.asarray(perceived, dtype=float) - center) / TIME_WIDTH)
        + net_effect
        + COEFF_AGE * (np.asarray(age, dtype=float) - AGE_CENTER) / AGE_SCALE
        + COEFF_GROUP * np.asarray(is_group, dtype=float)
        + COEFF_BUS * (np.asarray(n_bus) > 0)
        + COEFF_BOARDING * (np.asarray(boarding_delta, dtype=float) - BOARDING_CENTER) / BOARDING_SCALE
    )


class ConfigError(ValueError):
    pass


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 7
    n_rows: int = 20_000
    target_minority_fraction: float = 0.0585
    n_arrival_flights: int = 160
    n_departure_flights: int = 160
    missingness_rate: float = 0.005
    noise_scale: float = 1.0

    def __post_init__(self):
        if self.n_rows < 1:
            raise ConfigError("n_rows must be >= 1")
        if not 0.0 < self.target_minority_fraction < 1.0:
            raise ConfigError("target_minority_fraction must be in (0, 1)")
        if self.n_arrival_flights < 1 or self.n_departure_flights < 1:
            raise ConfigError("flight counts must be >= 1")
        if not 0.0 <= self.missingness_rate <= 0.04:
            raise ConfigError("missingness_rate must be in [0, 0.04]")
        if self.noise_scale <= 0:
            raise ConfigError("noise_scale must be > 0")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed, "n_rows": self.n_rows,
            "target_minority_fraction": self.target_minority_fraction,
            "n_arrival_flights": self.n_arrival_flights,
            "n_departure_flights": self.n_departure_flights,
            "missingness_rate": self.missingness_rate,
            "noise_scale": self.noise_scale,
        }


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _calibrate_intercept(z: np.ndarray, target: float) -> float:
    """Bisect the intercept so the mean miss probability hits the target."""
    lo, hi = -40.0, 40.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if float(_sigmoid(z + mid).mean()) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _day_lookup(n_days: int = 370) -> list[tuple[int, int]]:
    base = EPOCH.date()
    out = []
    for d in range(n_days):
        date = base + datetime.timedelta(days=d)
        out.append((date.weekday(), date.day))
    return out


def generate(config: SynthConfig) -> list[ConnectionRecord]:
    """Generate one deterministic batch of connection records."""
    rng = np.random.default_rng(config.seed)
    n = config.n_rows
    n_arr, n_dep = config.n_arrival_flights, config.n_departure_flights

    arr_names = [f"TP{100 + i}" for i in range(n_arr)]
    dep_names = [f"TP{100 + n_arr + j}" for j in range(n_dep)]
    arr_schengen = rng.random(n_arr) < 0.55
    dep_schengen = rng.random(n_dep) < 0.55
    arr_base_delay = rng.normal(FLIGHT_BASE_DELAY_MEAN, FLIGHT_BASE_DELAY_SD, n_arr)
    arr_effect = rng.normal(0.0, FLIGHT_EFFECT_SD, n_arr)
    dep_effect = rng.normal(0.0, FLIGHT_EFFECT_SD, n_dep)

    arr_idx = rng.integers(0, n_arr, n)
    dep_idx = rng.integers(0, n_dep, n)
    day = rng.integers(0, 365, n)
    minute_of_day = rng.integers(5 * 60, 23 * 60, n)
    sched_on = day * 1440 + minute_of_day
    sched_conn = np.minimum(25 + np.round(np.exp(rng.normal(4.05, 0.60, n))), 700.0).astype(np.int64)
    sched_off = sched_on + sched_conn
    arr_delay = np.round(arr_base_delay[arr_idx]
                         + rng.normal(0.0, DELAY_NOISE_SD, n)).astype(np.int64)
    act_on = sched_on + arr_delay
    dep_delay = np.maximum(np.round(rng.normal(3.0, 9.0, n)), -15).astype(np.int64)
    act_off = sched_off + dep_delay

    age = np.clip(np.round(rng.normal(AGE_CENTER, AGE_SCALE, n)), 0, 100).astype(np.int64)
    sex = rng.choice(np.array(["F", "M", "unknown"]), size=n, p=[0.47, 0.51, 0.02])
    is_group = rng.random(n) < 0.32
    class_from = rng.choice(np.array(["Y", "J", "W"]), size=n, p=[0.80, 0.15, 0.05])
    class_to = rng.choice(np.array(["Y", "J", "W"]), size=n, p=[0.80, 0.15, 0.05])
    boarding_delta = np.maximum(np.round(rng.normal(BOARDING_CENTER, BOARDING_SCALE, n)), 0).astype(np.int64)
    uses_bus = rng.random(n) < 0.30
    n_bus = np.where(uses_bus, rng.integers(1, 4, n), 0).astype(np.int64)

    origin_s = arr_schengen[arr_idx]
    dest_s = dep_schengen[dep_idx]
    net_tokens = np.where(origin_s, np.where(dest_s, "SS", "SN"), np.where(dest_s, "NS", "NN"))

    perceived = sched_conn - arr_delay
    z = (
        ground_truth_logit(perceived, net_tokens, age, is_group, n_bus, boarding_delta)
        + arr_effect[arr_idx]
        + dep_effect[dep_idx]
        + rng.normal(0.0, LATENT_NOISE_SD * config.noise_scale, n)
    )
    intercept = _calibrate_intercept(z, config.target_minority_fraction)
    missed = rng.random(n) < _sigmoid(z + intercept)

    # optional-field missingness, drawn per field for determinism
    rate = config.missingness_rate
    miss_masks = {name: rng.random(n) < rate
                  for name in ("sex", "age", "is_group", "class_from", "class_to",
                               "boarding_delta", "n_bus")}

    days = _day_lookup()
    records = []
    for i in range(n):
        dep_day_idx = int(sched_off[i] // 1440)
        weekday, month_day = days[dep_day_idx]
        records.append(ConnectionRecord(
            arrival_flight_designator=arr_names[arr_idx[i]],
            departure_flight_designator=dep_names[dep_idx[i]],
            origin_schengen=bool(origin_s[i]),
            destination_schengen=bool(dest_s[i]),
            departure_weekday=weekday,
            departure_month_day=month_day,
            scheduled_on_blocks=int(sched_on[i]),
            scheduled_off_blocks=int(sched_off[i]),
            actual_on_blocks=int(act_on[i]),
            actual_off_blocks=int(act_off[i]),
            sex=None if miss_masks["sex"][i] else str(sex[i]),
            age=None if miss_masks["age"][i] else int(age[i]),
            is_group=None if miss_masks["is_group"][i] else bool(is_group[i]),
            class_from=None if miss_masks["class_from"][i] else str(class_from[i]),
            class_to=None if miss_masks["class_to"][i] else str(class_to[i]),
            boarding_delta=None if miss_masks["boarding_delta"][i] else int(boarding_delta[i]),
            n_bus=None if miss_masks["n_bus"][i] else int(n_bus[i]),
            missed=bool(missed[i]),
        ))
    return records


def listwise_delete(records: Sequence[ConnectionRecord],
                    required_features: Iterable[str]) -> tuple[list[ConnectionRecord], int]:
    """Drop every record missing any required feature; order is preserved."""
    required = tuple(required_features)
    kept = []
    dropped = 0
    for record in records:
        if any(feature_value(record, f) is None for f in required):
            dropped += 1
        else:
            kept.append(record)
    return kept, dropped


# --- CSV schema ---------------------------------------------------------------

ORIGIN_SCHENGEN = "Origin Schengen"
DESTINATION_SCHENGEN = "Destination Schengen"
SCH_ON_BLOCKS = "Sch. On-Blocks"
ACT_ON_BLOCKS = "Act. On-Blocks"
SCH_OFF_BLOCKS = "Sch. Off-Blocks"
ACT_OFF_BLOCKS = "Act. Off-Blocks"
MISSED = "Missed"

CSV_COLUMNS = (
    TP_FROM, TP_TO, ORIGIN_SCHENGEN, DESTINATION_SCHENGEN, "Traffic Network",
    DEP_DAY, DEP_MONTH_DAY,
    SCH_ON_BLOCKS, ACT_ON_BLOCKS, SCH_OFF_BLOCKS, ACT_OFF_BLOCKS,
    SEX, AGE, IS_GROUP, CLASS_FROM, CLASS_TO, BOARDING_DELTA, N_BUS, MISSED,
)

_BASE_REQUIRED = (TP_FROM, TP_TO, ORIGIN_SCHENGEN, DESTINATION_SCHENGEN,
                  DEP_DAY, DEP_MONTH_DAY, SCH_ON_BLOCKS, SCH_OFF_BLOCKS, MISSED)
_PASSENGER_REQUIRED = (SEX, AGE, IS_GROUP, CLASS_FROM, CLASS_TO)


def required_columns(stage: DsmStage) -> tuple[str, ...]:
    """CSV columns a stage needs; later stages extend earlier ones."""
    stage = DsmStage(stage)
    cols = list(_BASE_REQUIRED)
    if stage is not DsmStage.STRATEGIC:
        cols.extend(_PASSENGER_REQUIRED)
    if stage in (DsmStage.TACTICAL, DsmStage.POST_OPERATIONS):
        cols.append(ACT_ON_BLOCKS)
    if stage is DsmStage.POST_OPERATIONS:
        cols.extend((ACT_OFF_BLOCKS, BOARDING_DELTA, N_BUS))
    return tuple(cols)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt(parser, cell: Optional[str]):
    """Parse an optional cell; blanks and unparseable text become missing."""
    if cell is None or cell.strip() == "":
        return None
    try:
        return parser(cell)
    except ValueError:
        return None


def _req(parser, cell: Optional[str], column: str):
    if cell is None or cell.strip() == "":
        raise ValueError(f"required cell {column!r} is empty")
    return parser(cell)


@dataclass
class IngestResult:
    records: list[ConnectionRecord]
    n_rejected: int
    rejects_path: Optional[Path]


def ingest_csv(path, schema: Union[DsmStage, Sequence[str]]) -> IngestResult:
    """Read a pre-joined connection table into typed records.

    ``schema`` names the stage (or an explicit column list) whose columns
    must be present; a missing required column raises SchemaError naming it.
    Rows that cannot produce a valid record are appended to a
    ``<name>.rejects.csv`` sidecar instead of aborting the run; unparseable
    optional cells simply become missing values.
    """
    path = Path(path)
    if isinstance(schema, DsmStage) or isinstance(schema, str):
        required = required_columns(DsmStage(schema))
    else:
        required = tuple(schema)

    records: list[ConnectionRecord] = []
    rejects: list[tuple[int, str, list[str]]] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        missing_cols = [c for c in required if c not in header]
        if missing_cols:
            raise SchemaError(f"missing required column(s): {', '.join(missing_cols)}")
        col_idx = {name: header.index(name) for name in header}

        def cell(row: list[str], column: str) -> Optional[str]:
            idx = col_idx.get(column)
            return row[idx] if idx is not None and idx < len(row) else None

        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                rejects.append((line_no, f"expected {len(header)} fields, got {len(row)}", row))
                continue
            try:
                records.append(ConnectionRecord(
                    arrival_flight_designator=_req(str.strip, cell(row, TP_FROM), TP_FROM),
                    departure_flight_designator=_req(str.strip, cell(row, TP_TO), TP_TO),
                    origin_schengen=_req(_parse_bool, cell(row, ORIGIN_SCHENGEN), ORIGIN_SCHENGEN),
                    destination_schengen=_req(_parse_bool, cell(row, DESTINATION_SCHENGEN),
                                              DESTINATION_SCHENGEN),
                    departure_weekday=_req(lambda s: int(s), cell(row, DEP_DAY), DEP_DAY),
                    departure_month_day=_req(lambda s: int(s), cell(row, DEP_MONTH_DAY),
                                             DEP_MONTH_DAY),
                    scheduled_on_blocks=_req(iso_to_minutes, cell(row, SCH_ON_BLOCKS),
                                             SCH_ON_BLOCKS),
                    scheduled_off_blocks=_req(iso_to_minutes, cell(row, SCH_OFF_BLOCKS),
                                              SCH_OFF_BLOCKS),
                    missed=_req(_parse_bool, cell(row, MISSED), MISSED),
                    actual_on_blocks=_opt(iso_to_minutes, cell(row, ACT_ON_BLOCKS)),
                    actual_off_blocks=_opt(iso_to_minutes, cell(row, ACT_OFF_BLOCKS)),
                    sex=_opt(str.strip, cell(row, SEX)),
                    age=_opt(lambda s: int(s), cell(row, AGE)),
                    is_group=_opt(_parse_bool, cell(row, IS_GROUP)),
                    class_from=_opt(str.strip, cell(row, CLASS_FROM)),
                    class_to=_opt(str.strip, cell(row, CLASS_TO)),
                    boarding_delta=_opt(lambda s: int(s), cell(row, BOARDING_DELTA)),
                    n_bus=_opt(lambda s: int(s), cell(row, N_BUS)),
                ))
            except ValueError as exc:
                rejects.append((line_no, str(exc), row))

    rejects_path = None
    if rejects:
        rejects_path = path.with_suffix(path.suffix + ".rejects.csv")
        with rejects_path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["line", "reason", "row"])
            for line_no, reason, row in rejects:
                writer.writerow([line_no, reason, ",".join(row)])
    return IngestResult(records=records, n_rejected=len(rejects), rejects_path=rejects_path)


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def write_csv(records: Sequence[ConnectionRecord], path) -> Path:
    """Write records in the canonical CSV schema (UTF-8, RFC 4180 quoting)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([
                r.arrival_flight_designator,
                r.departure_flight_designator,
                _format_cell(r.origin_schengen),
                _format_cell(r.destination_schengen),
                r.network.value,
                r.departure_weekday,
                r.departure_month_day,
                minutes_to_iso(r.scheduled_on_blocks),
                "" if r.actual_on_blocks is None else minutes_to_iso(r.actual_on_blocks),
                minutes_to_iso(r.scheduled_off_blocks),
                "" if r.actual_off_blocks is None else minutes_to_iso(r.actual_off_blocks),
                _format_cell(r.sex),
                _format_cell(r.age),
                _format_cell(r.is_group),
                _format_cell(r.class_from),
                _format_cell(r.class_to),
                _format_cell(r.boarding_delta),
                _format_cell(r.n_bus),
                _format_cell(r.missed),
            ])
    return path


def minority_fraction(records: Sequence[ConnectionRecord]) -> float:
    if not records:
        return 0.0
    return sum(r.missed for r in records) / len(records)
