import json

import pytest
from hypothesis import given, strategies as st

from miabsim.config import (
    KNOWN_KEYS, ParseError, ScenarioConfig, ScenarioKind, ValidationError, config_from_dict, load_config,
)

BASE = {"scenario_kind": "miab", "passenger_fraction": 0.5, "cbr_packet_bits": 3072}


def test_miab_half_passengers_gives_six_per_bus(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(BASE))
    cfg = load_config(p)
    assert cfg.scenario_kind is ScenarioKind.MIAB
    assert cfg.num_passengers == 36
    assert cfg.passengers_per_bus == 6


@pytest.mark.parametrize("frac,per_bus", [(0.25, 3), (0.5, 6), (0.75, 9)])
def test_passengers_per_bus_grid(frac, per_bus):
    cfg = config_from_dict({**BASE, "passenger_fraction": frac})
    assert cfg.passengers_per_bus == per_bus


def test_defaults_match_numerology(tmp_path):
    cfg = config_from_dict(BASE)
    assert cfg.num_rbs == 66
    assert cfg.slot_s == 0.25e-3
    assert cfg.scs_hz == 60e3
    assert cfg.carrier_hz == 28e9
    assert cfg.bandwidth_hz == 50e6
    assert cfg.cbr_interarrival_slots == 4
    assert cfg.num_buses == 6 and cfg.total_ues == 72


def test_fraction_not_integral_per_bus():
    with pytest.raises(ValidationError) as e:
        config_from_dict({**BASE, "passenger_fraction": 0.30})
    assert e.value.key == "passenger_fraction"


def test_unknown_key_rejected():
    with pytest.raises(ValidationError) as e:
        config_from_dict({**BASE, "num_rb": 66})
    assert e.value.key == "num_rb"


def test_missing_required_key():
    with pytest.raises(ValidationError) as e:
        config_from_dict({"scenario_kind": "miab", "passenger_fraction": 0.5})
    assert e.value.key == "cbr_packet_bits"


def test_malformed_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        load_config(p)
    p.write_text("[1, 2]")
    with pytest.raises(ParseError):
        load_config(p)


def test_rbs_must_fit_bandwidth():
    with pytest.raises(ValidationError) as e:
        config_from_dict({**BASE, "num_rbs": 70})
    assert e.value.key == "num_rbs"


@pytest.mark.parametrize("name", ["OnlyMacros", "macros-picos", "MIab", "miab"])
def test_scenario_aliases(name):
    assert isinstance(config_from_dict({**BASE, "scenario_kind": name}).scenario_kind, ScenarioKind)


def test_to_dict_roundtrip():
    cfg = config_from_dict({**BASE, "seed": 9, "admission_policy": "rsrp_dwell"})
    again = config_from_dict(cfg.to_dict())
    assert again == cfg
    assert set(cfg.to_dict()) == set(KNOWN_KEYS)


@given(frac=st.sampled_from([0.25, 0.5, 0.75]), bits=st.sampled_from([1024, 2048, 3072]),
       kind=st.sampled_from(list(ScenarioKind)), seed=st.integers(0, 2**64 - 1))
def test_valid_grid_configs_validate(frac, bits, kind, seed):
    cfg = ScenarioConfig(kind, frac, bits, seed=seed).validate()
    assert cfg.num_passengers + cfg.num_pedestrians == cfg.total_ues
    assert cfg.num_passengers == cfg.passengers_per_bus * cfg.num_buses


@given(frac=st.floats(0.0, 1.0))
def test_fraction_validation_is_exact(frac):
    exact = frac * 72
    ok = abs(exact - round(exact)) <= 1e-9 and int(round(exact)) % 6 == 0
    try:
        ScenarioConfig(ScenarioKind.MIAB, frac, 3072).validate()
        assert ok
    except ValidationError:
        assert not ok
