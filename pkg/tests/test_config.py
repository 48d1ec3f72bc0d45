import pytest
import yaml

from hybridcomp.config import (
    DESK, PAPER, ConfigError, SystemConfig, db_to_linear, dbm_to_watt, dump_config, get_preset, load_config,
)


def test_unit_conversions():
    assert dbm_to_watt(-120.0) == pytest.approx(1e-15)
    assert db_to_linear(-60.0) == pytest.approx(1e-6)
    assert dbm_to_watt(30.0) == pytest.approx(1.0)


def test_full_scale_preset_values():
    c = PAPER
    assert (c.horizon_T, c.num_slots_I, c.bandwidth_B, c.data_demand_Dk) == (200.0, 200, 5e6, 6e6)
    assert (c.cycles_per_bit_c0, c.max_cpu_f, c.capacitance_gamma, c.rician_kappa) == (1e3, 6e9, 1e-27, 15.0)
    assert c.noise_power_sigma0sq == pytest.approx(1e-15)
    assert c.pathloss_ref_beta0 == pytest.approx(1e-6)
    assert c.num_users == 20
    assert c.slot_duration == 1.0


def test_desk_preset_scaled():
    assert (DESK.num_slots_I, DESK.num_aircomp_J, DESK.num_edge_K) == (20, 5, 5)
    assert DESK.data_demand_Dk == 0.6e6
    assert DESK.slot_duration == PAPER.slot_duration


def test_get_preset_unknown():
    with pytest.raises(ConfigError):
        get_preset("lab")


@pytest.mark.parametrize("field,value", [
    ("mse_threshold_zeta", 0.0), ("horizon_T", -1.0), ("num_slots_I", 0), ("num_edge_K", 0),
    ("num_aircomp_J", -1), ("p_max_edge", 0.0), ("data_demand_Dk", -5.0),
])
def test_invalid_values_rejected(field, value):
    with pytest.raises(ConfigError):
        SystemConfig(**{field: value})


def test_yaml_round_trip(tmp_path):
    cfg = DESK.replace(mse_threshold_zeta=0.7, rng_seed=12345, conjugate_phase=True)
    path = tmp_path / "c.yaml"
    dump_config(cfg, path)
    assert load_config(path) == cfg


def test_yaml_overrides_base(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("num_edge_K: 3\nmse_threshold_zeta: 1.5\n")
    cfg = load_config(path, base=DESK)
    assert cfg.num_edge_K == 3 and cfg.num_aircomp_J == DESK.num_aircomp_J
    assert cfg.mse_threshold_zeta == 1.5


@pytest.mark.parametrize("text", ["bogus_key: 1\n", "num_slots_I: 2.5\n", "- 1\n- 2\n", "a: [\n",
                                  "conjugate_phase: 3\n", "p_max_edge: abc\n"])
def test_bad_files_rejected(tmp_path, text):
    path = tmp_path / "c.yaml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(path)


def test_empty_file_is_defaults(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("")
    assert load_config(path) == SystemConfig()


def test_dump_is_plain_yaml(tmp_path):
    path = tmp_path / "c.yaml"
    dump_config(PAPER, path)
    data = yaml.safe_load(path.read_text())
    assert data["num_slots_I"] == 200 and set(data) == set(PAPER.to_dict())
