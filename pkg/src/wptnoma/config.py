"""Network configuration: dataclasses, TOML loading, unit conversion, hashing."""

import hashlib
from dataclasses import dataclass, field, asdict

import numpy as np
import tomli


def dbm_to_watts(p_dbm):
    """10^((P_dbm - 30)/10); 46 dBm -> 39.8107 W."""
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


@dataclass
class PowerModel:
    """Per-chain circuit power draws in watts.

    The BS spends one transmit chain per active antenna (DAC, mixer, transmit
    filter); each device runs a full receive chain plus its synthesizer.
    """

    dac_w: float = 10.0e-3
    adc_w: float = 10.0e-3
    filt_w: float = 2.5e-3   # transmit filter
    filr_w: float = 2.5e-3   # receive filter
    mix_w: float = 30.3e-3
    syn_w: float = 50.0e-3
    lna_w: float = 20.0e-3
    ifa_w: float = 3.0e-3

    @property
    def bs_chain_w(self):
        return self.dac_w + self.mix_w + self.filt_w

    @property
    def user_chain_w(self):
        return self.adc_w + self.mix_w + self.filr_w + self.lna_w + self.ifa_w + self.syn_w


@dataclass
class SolverParams:
    rho: float = 0.088
    epsilon: float = 1e-7            # consensus residual threshold, squared units
    max_iters: int = 200
    inner_tol: float = 1e-6          # projected-gradient stop for the local solves
    max_inner_iters: int = 500
    dinkelbach_epsilon: float = 1e-7
    dinkelbach_max_iters: int = 50
    round_c: bool = True             # binarize c in the final pipeline rounding


@dataclass
class NetworkConfig:
    """Static description of one multicell scenario.

    Distances are meters, powers watts (loader converts any ``*_dbm`` key),
    times seconds, bandwidth Hz. ``antennas`` may be an int (uniform budget)
    or a per-cell list.
    """

    cells: int = 1
    devices: int = 2                 # per cell
    subcarriers: int = 1
    antennas: object = 8
    antenna_selection: bool = True   # False powers the full array (no-AS baseline)
    bandwidth_hz: float = 1.0
    block_seconds: float = 1.0
    noise_w: float = 1e-6
    wpt_efficiency: float = 0.8
    rmin_bits_hz: float = 0.1        # per-device rate floor, normalized per Hz
    bs_power_max_w: float = dbm_to_watts(46.0)
    user_power_max_w: float = dbm_to_watts(23.0)
    bs_power_fixed_w: object = None  # pin P_k instead of optimizing it
    tau_fixed_s: object = None       # pin the charging slot instead of optimizing it
    csi: str = "perfect"             # perfect | imperfect
    csi_error_var: float = 0.0
    mode: str = "noma"               # noma | oma
    rng_seed: int = 0

    # geometry
    cell_radius_m: float = 500.0
    path_loss_exponent: float = 2.0
    reference_distance_m: float = 75.0
    reference_alpha: float = 1.0 / 75.0
    placement: str = "fixed"         # fixed | uniform
    device_distance_m: object = 75.0 # scalar, or per-device list of length `devices`
    min_distance_m: float = 25.0     # uniform placement exclusion radius

    power_model: PowerModel = field(default_factory=PowerModel)
    solver: SolverParams = field(default_factory=SolverParams)

    def antenna_budget(self):
        """Per-cell antenna budgets as an int array of length `cells`."""
        m = np.asarray(self.antennas, dtype=int)
        if m.ndim == 0:
            m = np.full(self.cells, int(m))
        if m.shape != (self.cells,):
            raise ValueError("antennas must be a scalar or one entry per cell")
        if np.any(m < 1):
            raise ValueError("antenna budgets must be >= 1")
        return m

    def validate(self):
        if self.cells < 1 or self.devices < 1 or self.subcarriers < 1:
            raise ValueError("cells/devices/subcarriers must be positive")
        if self.csi not in ("perfect", "imperfect"):
            raise ValueError("csi must be 'perfect' or 'imperfect'")
        if self.mode not in ("noma", "oma"):
            raise ValueError("mode must be 'noma' or 'oma'")
        if self.csi == "imperfect" and self.csi_error_var <= 0:
            raise ValueError("imperfect CSI needs csi_error_var > 0")
        if not 0 < self.wpt_efficiency <= 1:
            raise ValueError("wpt_efficiency must lie in (0, 1]")
        if self.block_seconds <= 0 or self.bandwidth_hz <= 0 or self.noise_w <= 0:
            raise ValueError("block_seconds, bandwidth_hz, noise_w must be positive")
        if self.tau_fixed_s is not None and not 0 < self.tau_fixed_s < self.block_seconds:
            raise ValueError("tau_fixed_s must lie in (0, block_seconds)")
        self.antenna_budget()
        return self

    def subcarrier_bandwidth(self):
        return self.bandwidth_hz / self.subcarriers


def _convert_dbm_keys(d):
    """Recursively replace ``key_dbm`` entries with ``key_w`` in watts."""
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out[k] = _convert_dbm_keys(v)
        elif k.endswith("_dbm"):
            out[k[:-4] + "_w"] = dbm_to_watts(float(v))
        else:
            out[k] = v
    return out


# TOML sections folded into the flat dataclass fields
_SECTIONS = ("network", "geometry", "solver", "power_model")


def config_from_dict(raw):
    raw = _convert_dbm_keys(raw)
    flat = {}
    for sec in ("network", "geometry"):
        flat.update(raw.get(sec, {}))
    for k, v in raw.items():
        if k not in _SECTIONS:
            flat[k] = v

    power = PowerModel(**raw.get("power_model", {}))
    solver = SolverParams(**raw.get("solver", {}))

    known = set(NetworkConfig.__dataclass_fields__) - {"power_model", "solver"}
    unknown = set(flat) - known
    if unknown:
        raise ValueError("unknown config keys: %s" % sorted(unknown))
    cfg = NetworkConfig(power_model=power, solver=solver, **flat)
    return cfg.validate()


def load_config(path):
    """Read a scenario description from a TOML file."""
    with open(path, "rb") as f:
        raw = tomli.load(f)
    return config_from_dict(raw)


def config_hash(cfg: NetworkConfig):
    """Short stable digest of the fully-resolved configuration."""
    items = sorted(_flatten(asdict(cfg)).items())
    blob = ";".join("%s=%r" % kv for kv in items)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = prefix + k
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (list, tuple, np.ndarray)):
            out[key] = tuple(np.asarray(v).ravel().tolist())
        else:
            out[key] = v
    return out
