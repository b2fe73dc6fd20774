import pytest
from hypothesis import given, strategies as st

from connrisk.domain import (
    AGE, DsmStage, SCH_CONN_TIME, PERCEIVED_CONN_TIME, ACTUAL_CONN_TIME, N_BUS,
    BOARDING_DELTA, ConnectionRecord, TrafficNetwork, connection_times,
    iso_to_minutes, minutes_to_iso, stage_features, stage_time_feature, traffic_network,
)


def make_record(**overrides) -> ConnectionRecord:
    base = dict(
        arrival_flight_designator="TP101",
        departure_flight_designator="TP301",
        origin_schengen=True,
        destination_schengen=False,
        departure_weekday=2,
        departure_month_day=14,
        scheduled_on_blocks=540,
        scheduled_off_blocks=600,
        actual_on_blocks=550,
        actual_off_blocks=600,
        missed=False,
        sex="F",
        age=35,
        is_group=False,
        class_from="Y",
        class_to="Y",
        boarding_delta=25,
        n_bus=0,
    )
    base.update(overrides)
    return ConnectionRecord(**base)


class TestTrafficNetwork:
    def test_schengen_to_non_schengen(self):
        assert traffic_network(True, False) is TrafficNetwork.SN

    def test_within_schengen(self):
        assert traffic_network(True, True) is TrafficNetwork.SS

    def test_outside_schengen(self):
        assert traffic_network(False, False) is TrafficNetwork.NN

    def test_total_and_deterministic(self):
        outcomes = {traffic_network(o, d) for o in (True, False) for d in (True, False)}
        assert outcomes == set(TrafficNetwork)


class TestConnectionTimes:
    def test_ten_minute_arrival_delay(self):
        r = make_record(scheduled_on_blocks=540, actual_on_blocks=550,
                        scheduled_off_blocks=600, actual_off_blocks=600)
        t = connection_times(r)
        assert (t.scheduled, t.perceived, t.actual) == (60, 50, 50)

    def test_all_equal_timestamps(self):
        r = make_record(scheduled_on_blocks=600, actual_on_blocks=600,
                        scheduled_off_blocks=600, actual_off_blocks=600)
        t = connection_times(r)
        assert (t.scheduled, t.perceived, t.actual) == (0, 0, 0)

    def test_arrival_after_scheduled_departure_is_negative(self):
        r = make_record(scheduled_on_blocks=540, actual_on_blocks=630,
                        scheduled_off_blocks=600, actual_off_blocks=630)
        assert connection_times(r).perceived == -30

    def test_missing_actuals_give_missing_times(self):
        r = make_record(actual_on_blocks=None, actual_off_blocks=None)
        t = connection_times(r)
        assert t.scheduled == 60
        assert t.perceived is None and t.actual is None

    @given(st.integers(0, 10_000), st.integers(-120, 600), st.integers(10, 600))
    def test_perceived_identity(self, sched_on, arrival_delay, sched_conn):
        r = make_record(scheduled_on_blocks=sched_on,
                        scheduled_off_blocks=sched_on + sched_conn,
                        actual_on_blocks=sched_on + arrival_delay,
                        actual_off_blocks=sched_on + sched_conn)
        t = connection_times(r)
        assert t.perceived == t.scheduled - (r.actual_on_blocks - r.scheduled_on_blocks)


class TestStageFeatures:
    def test_strategic(self):
        features = stage_features(DsmStage.STRATEGIC)
        assert len(features) == 6
        assert SCH_CONN_TIME in features
        assert AGE not in features

    def test_tactical_swaps_time_feature(self):
        features = stage_features(DsmStage.TACTICAL)
        assert PERCEIVED_CONN_TIME in features
        assert SCH_CONN_TIME not in features

    def test_post_operations_adds_ground_handling(self):
        features = stage_features(DsmStage.POST_OPERATIONS)
        assert N_BUS in features and BOARDING_DELTA in features
        assert ACTUAL_CONN_TIME in features

    def test_monotone_information(self):
        time_features = {SCH_CONN_TIME, PERCEIVED_CONN_TIME, ACTUAL_CONN_TIME}
        strat = set(stage_features(DsmStage.STRATEGIC)) - time_features
        pre = set(stage_features(DsmStage.PRE_TACTICAL)) - time_features
        tact = set(stage_features(DsmStage.TACTICAL)) - time_features
        post = set(stage_features(DsmStage.POST_OPERATIONS)) - time_features
        assert strat < pre
        assert pre == tact
        assert tact < post

    def test_time_feature_per_stage(self):
        assert stage_time_feature(DsmStage.STRATEGIC) == SCH_CONN_TIME
        assert stage_time_feature(DsmStage.PRE_TACTICAL) == SCH_CONN_TIME
        assert stage_time_feature(DsmStage.TACTICAL) == PERCEIVED_CONN_TIME
        assert stage_time_feature(DsmStage.POST_OPERATIONS) == ACTUAL_CONN_TIME


class TestRecordValidation:
    @pytest.mark.parametrize("field,value", [
        ("departure_weekday", 7),
        ("departure_weekday", -1),
        ("departure_month_day", 0),
        ("departure_month_day", 32),
        ("age", -1),
        ("age", 121),
        ("sex", "X"),
        ("boarding_delta", -2),
        ("n_bus", -1),
    ])
    def test_rejects_out_of_range(self, field, value):
        with pytest.raises(ValueError):
            make_record(**{field: value})

    def test_network_property(self):
        assert make_record(origin_schengen=False, destination_schengen=True).network \
            is TrafficNetwork.NS


def test_timestamp_roundtrip():
    assert iso_to_minutes(minutes_to_iso(123456)) == 123456
    assert iso_to_minutes("2019-01-01T00:00") == 0
    assert iso_to_minutes("720") == 720
