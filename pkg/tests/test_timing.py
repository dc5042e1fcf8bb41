import json

import pytest
from hypothesis import given, settings, strategies as st

from mqttuma.core import FlowTranscript, MessageKind, NodeRole, PhaseKind
from mqttuma.timing import (
    DEFAULT_TIMES,
    PHASE_ORDER,
    ConfigError,
    TimingConfig,
    TimingTerm,
    bill_coefficients,
    cost_transcript,
    phase_latency,
    publish_overhead_ratio,
)

EXPECTED = {
    PhaseKind.PROTECTION_AUTHORIZATION: 1207,
    PhaseKind.ACCESS: 164,
    PhaseKind.INITIAL_PUBLISH: 1147,
    PhaseKind.PUBLISH: 578,
    PhaseKind.SUBSCRIBE: 92,
}


@pytest.mark.parametrize("phase", list(EXPECTED))
def test_default_phase_latency(phase):
    b = phase_latency(phase)
    assert b.total == EXPECTED[phase]
    assert isinstance(b.total, int)
    assert sum(b.contributions.values()) == b.total


def test_fog_server_processing_is_33():
    assert DEFAULT_TIMES[TimingTerm.T_S1_MB2_RS] == 33


def test_zero_config():
    zero = TimingConfig({t: 0 for t in TimingTerm})
    assert all(phase_latency(p, zero).total == 0 for p in PHASE_ORDER)


def test_cost_empty_transcript():
    assert cost_transcript(FlowTranscript()).total == 0


def test_cost_single_arrow_with_processing():
    t = FlowTranscript()
    t.send(NodeRole.P1, NodeRole.MB1_P2_RO, MessageKind.Publish, resource="x")
    t.process(NodeRole.MB1_P2_RO)
    assert cost_transcript(t).total == 100 + 4


def test_coefficient_billing_reproduces_publish():
    t = FlowTranscript(phase=PhaseKind.PUBLISH)
    t.send(NodeRole.P1, NodeRole.MB1_P2_RO, MessageKind.Publish, resource="x")
    t.send(NodeRole.MB1_P2_RO, NodeRole.S1_MB2_RS, MessageKind.Publish, resource="x")
    bill_coefficients(t, TimingConfig().coefficients[PhaseKind.PUBLISH])
    assert cost_transcript(t).total == 578


times_st = st.fixed_dictionaries({t: st.integers(0, 10_000) for t in TimingTerm})


@settings(max_examples=200)
@given(a=times_st, b=times_st, k=st.integers(0, 50), phase=st.sampled_from(PHASE_ORDER))
def test_latency_is_linear(a, b, k, phase):
    ca, cb = TimingConfig(a), TimingConfig(b)
    summed = TimingConfig({t: a[t] + b[t] for t in TimingTerm})
    assert phase_latency(phase, summed).total == (
        phase_latency(phase, ca).total + phase_latency(phase, cb).total
    )
    assert phase_latency(phase, ca.scaled(k)).total == k * phase_latency(phase, ca).total


@settings(max_examples=200)
@given(a=times_st, term=st.sampled_from(list(TimingTerm)), bump=st.integers(1, 1000),
       phase=st.sampled_from(PHASE_ORDER))
def test_latency_is_monotone(a, term, bump, phase):
    base = TimingConfig(a)
    bigger = TimingConfig({**a, term: a[term] + bump})
    assert phase_latency(phase, bigger).total >= phase_latency(phase, base).total


def test_ratio_report():
    r = publish_overhead_ratio()
    assert r.publish_ms == 578 and r.access_ms == 164 and r.subscribe_ms == 92
    assert r.ratios["subscribe/publish"] == pytest.approx(92 / 578)
    assert round(r.ratios["subscribe/publish"], 3) == 0.159
    assert round(r.ratios["access/publish"], 3) == 0.284
    assert r.ratios["(publish-426)/publish"] == pytest.approx(152 / 578)


def test_ratio_collapses_without_fog_authorization():
    cfg = TimingConfig().with_times(T_AS=0, T_RSxAS=0)
    r = publish_overhead_ratio(cfg)
    assert r.access_ms < 164


def test_config_round_trip(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(TimingConfig().to_dict()))
    assert TimingConfig.load(path) == TimingConfig()


def test_partial_config_and_coefficient_override():
    cfg = TimingConfig.from_dict({"T_P1xMB1": 0, "coefficients": {"Publish": {"T_P1xMB1": 2}}})
    assert cfg[TimingTerm.T_P1xMB1] == 0
    assert cfg.coefficients[PhaseKind.PUBLISH][TimingTerm.T_P1xMB1] == 2
    assert phase_latency(PhaseKind.PUBLISH, cfg).total == 574


@pytest.mark.parametrize(
    "data",
    [{"T_bogus": 1}, {"T_AS": -1}, {"T_AS": 1.5}, {"T_AS": True}, [],
     {"coefficients": {"Nope": {}}}, {"coefficients": []}],
)
def test_config_errors(data):
    with pytest.raises(ConfigError):
        TimingConfig.from_dict(data)


def test_config_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{")
    with pytest.raises(ConfigError):
        TimingConfig.load(path)
