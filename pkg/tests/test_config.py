"""Configuration loading, unit conversion, validation, and hashing."""

import json
import math

import pytest
from hypothesis import given, strategies as st

from conftest import tiny_config, tiny_json_dict
from risbeam.config import (SystemConfig, config_from_json_dict, config_hash,
                            db2lin, dbm2watt, load_config, load_profile)
from risbeam.errors import ConfigError

# frozen unit-conversion oracles
P_35_DBM_W = 3.1622776601683795
NOISE_90_DBM_W = 1e-12


def test_dbm_conversion_oracles():
    assert dbm2watt(35.0) == P_35_DBM_W
    assert dbm2watt(-90.0) == NOISE_90_DBM_W
    assert db2lin(-30.0) == 1e-3
    assert db2lin(0.0) == 1.0


@given(st.floats(min_value=-120.0, max_value=60.0))
def test_dbm_is_db_shifted_by_30(x):
    assert dbm2watt(x) == pytest.approx(db2lin(x) / 1000.0, rel=1e-12)


@given(st.floats(min_value=-120.0, max_value=59.0))
def test_db2lin_monotone(x):
    assert db2lin(x + 1.0) > db2lin(x)


def test_desk_profile_values():
    cfg = load_profile("desk")
    assert (cfg.n_tx, cfg.n_ris, cfg.n_clusters) == (4, 8, 2)
    assert cfg.p_max == P_35_DBM_W
    assert cfg.noise_power == NOISE_90_DBM_W
    assert cfg.r_min_near == 0.5 and cfg.r_min_far == 0.1
    assert cfg.target_angles == (-math.pi / 4, math.pi / 4)
    assert cfg.beam_width == pytest.approx(math.radians(6.0))
    assert cfg.angle_grid_step == pytest.approx(math.pi / 100.0)


def test_paper_profile_values():
    cfg = load_profile("paper")
    assert (cfg.n_tx, cfg.n_ris, cfg.n_clusters) == (9, 36, 3)
    assert len(cfg.target_angles) == 3
    assert cfg.rician_k == 3.0


def test_load_profile_unknown_name():
    with pytest.raises(ConfigError):
        load_profile("nope")


def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(tiny_json_dict()), encoding="utf-8")
    cfg = load_config(path)
    assert cfg.n_ris == 4
    assert cfg.target_angles[0] == pytest.approx(math.radians(36.0))
    assert cfg.cluster_angle_ranges == ((math.radians(-30.0),
                                         math.radians(-20.0)),)
    assert cfg.pathloss_ref == pytest.approx(1e-3)


def test_load_config_rejects_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_unknown_key_is_an_error():
    data = tiny_json_dict()
    data["n_riss"] = 4
    with pytest.raises(ConfigError, match="unknown"):
        config_from_json_dict(data)


def test_missing_key_is_an_error():
    data = tiny_json_dict()
    del data["n_ris"]
    with pytest.raises(ConfigError, match="missing"):
        config_from_json_dict(data)


def test_bad_value_is_an_error():
    data = tiny_json_dict(n_tx="four")
    with pytest.raises(ConfigError, match="bad value"):
        config_from_json_dict(data)


@pytest.mark.parametrize("overrides", [
    dict(n_tx=0),
    dict(users_per_cluster=3),
    dict(p_max=0.0),
    dict(noise_power=-1.0),
    dict(r_min_near=-0.1),
    dict(beam_width=0.0),
    dict(angle_grid_step=-1.0),
    dict(spacing_ratio=0.0),
    dict(pathloss_exp_list=(2.2,)),
    dict(target_radii=(70.0, 80.0)),
    dict(target_angles=(math.pi / 2,), target_radii=(70.0,)),
    dict(cluster_angle_ranges=()),
    dict(cluster_angle_ranges=((0.5, 0.4),)),
    dict(rnu_radius_range=(0.0, 5.0)),
    dict(sca_tol=0.0),
    dict(t1_max=0),
])
def test_validation_rejects(overrides):
    with pytest.raises(ConfigError):
        tiny_config(**overrides)


def test_listlike_fields_normalize_to_tuples():
    cfg = tiny_config(target_angles=[0.2 * math.pi], target_radii=[70.0],
                      cluster_angle_ranges=[[-0.5, -0.4]])
    assert isinstance(cfg.target_angles, tuple)
    assert isinstance(cfg.cluster_angle_ranges[0], tuple)


def test_config_hash_stable_and_sensitive():
    a = tiny_config()
    b = tiny_config()
    assert config_hash(a) == config_hash(b)
    assert len(config_hash(a)) == 12
    assert config_hash(a) != config_hash(tiny_config(n_ris=8))
    assert config_hash(a) != config_hash(tiny_config(rng_seed=1))


def test_to_dict_covers_every_field():
    cfg = tiny_config()
    d = cfg.to_dict()
    assert d["n_tx"] == 2
    assert set(d) == {f.name for f in
                      __import__("dataclasses").fields(SystemConfig)}
