import numpy as np
import pytest

from wptnoma.config import (NetworkConfig, PowerModel, config_from_dict,
                            config_hash, dbm_to_watts, load_config)


def test_dbm_to_watts_anchors():
    assert dbm_to_watts(46.0) == pytest.approx(39.8107, rel=1e-5)
    assert dbm_to_watts(23.0) == pytest.approx(0.199526, rel=1e-5)
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert dbm_to_watts(0.0) == pytest.approx(1e-3)


def test_chain_power_component_sums():
    pm = PowerModel()
    # DAC + mixer + transmit filter; full receive chain plus synthesizer
    assert pm.bs_chain_w == pytest.approx(42.8e-3)
    assert pm.user_chain_w == pytest.approx(115.8e-3)


def test_chain_power_tracks_component_change():
    pm = PowerModel(dac_w=0.02)
    assert pm.bs_chain_w == pytest.approx(52.8e-3)


def test_default_limits():
    cfg = NetworkConfig()
    assert cfg.bs_power_max_w == pytest.approx(dbm_to_watts(46.0))
    assert cfg.user_power_max_w == pytest.approx(dbm_to_watts(23.0))
    assert cfg.rmin_bits_hz == 0.1
    assert cfg.solver.rho == 0.088
    assert cfg.solver.dinkelbach_epsilon == 1e-7


def test_subcarrier_bandwidth_exact():
    cfg = NetworkConfig(bandwidth_hz=10e6, subcarriers=20)
    assert cfg.subcarrier_bandwidth() == 10e6 / 20


def test_antenna_budget_broadcast_and_errors():
    assert np.array_equal(NetworkConfig(cells=3, antennas=16).antenna_budget(),
                          [16, 16, 16])
    assert np.array_equal(
        NetworkConfig(cells=2, antennas=[8, 32]).antenna_budget(), [8, 32])
    with pytest.raises(ValueError, match="per cell"):
        NetworkConfig(cells=2, antennas=[8]).antenna_budget()
    with pytest.raises(ValueError, match=">= 1"):
        NetworkConfig(antennas=0).antenna_budget()


@pytest.mark.parametrize("field,value,msg", [
    ("subcarriers", 0, "subcarriers"),
    ("cells", 0, "cells"),
    ("csi", "sloppy", "csi"),
    ("mode", "tdma", "mode"),
    ("wpt_efficiency", 1.5, "wpt_efficiency"),
    ("noise_w", 0.0, "noise_w"),
])
def test_validate_rejects_bad_fields(field, value, msg):
    cfg = NetworkConfig(**{field: value})
    with pytest.raises(ValueError, match=msg):
        cfg.validate()


def test_imperfect_csi_needs_error_variance():
    with pytest.raises(ValueError, match="csi_error_var"):
        NetworkConfig(csi="imperfect", csi_error_var=0.0).validate()
    NetworkConfig(csi="imperfect", csi_error_var=0.3).validate()


TOML = """
[network]
cells = 2
devices = 3
subcarriers = 4
antennas = [16, 32]
bandwidth_hz = 1e6
bs_power_max_dbm = 46.0
noise_w = 1e-9

[geometry]
device_distance_m = 50.0
cell_radius_m = 200.0

[solver]
rho = 0.1
max_iters = 77

[power_model]
dac_w = 0.011
"""


def test_load_config_sections_and_dbm_suffix(tmp_path):
    path = tmp_path / "net.toml"
    path.write_text(TOML)
    cfg = load_config(str(path))
    assert cfg.cells == 2 and cfg.devices == 3 and cfg.subcarriers == 4
    assert np.array_equal(cfg.antenna_budget(), [16, 32])
    # the _dbm suffix converts to watts on load
    assert cfg.bs_power_max_w == pytest.approx(39.8107, rel=1e-5)
    assert cfg.device_distance_m == 50.0
    assert cfg.solver.rho == 0.1 and cfg.solver.max_iters == 77
    assert cfg.power_model.dac_w == 0.011
    assert cfg.power_model.bs_chain_w == pytest.approx(0.011 + 30.3e-3 + 2.5e-3)


def test_unknown_keys_rejected():
    with pytest.raises(ValueError, match="cellz"):
        config_from_dict({"network": {"cellz": 3}})
    with pytest.raises(TypeError):
        config_from_dict({"solver": {"rho_typo": 1.0}})


def test_config_hash_stable_and_sensitive():
    a = config_from_dict({"network": {"cells": 2, "devices": 2}})
    b = config_from_dict({"network": {"cells": 2, "devices": 2}})
    c = config_from_dict({"network": {"cells": 2, "devices": 2},
                          "solver": {"rho": 0.9}})
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(c)
    assert len(config_hash(a)) == 12
