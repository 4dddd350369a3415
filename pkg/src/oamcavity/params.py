"""Lab-style configuration and derived physical parameters.

Converts mirror geometry, finesse, powers and wavelengths into the decay
rates, optorotational couplings and drive amplitudes the rest of the
package consumes.  All quantities are SI; angular frequencies in rad/s.

Conventions (fixed):
    kappa_i   = pi*c / (2*L*F_i)          amplitude half-linewidth, one-sided cavity
    g_i       = c*l_i / L                 optorotational coupling
    I         = M*R^2 / 2                 thin-disk moment of inertia
    gamma_phi = omega_phi / Q_phi
    eps_x     = sqrt(2*kappa*P_x / (hbar*omega_x))   photon-flux amplitude

The probe amplitude is evaluated at the drive frequency omega_1 rather than
omega_p; the relative error is Omega/omega_1 <~ 1e-7.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

SPEED_OF_LIGHT = 299792458.0  # m/s, exact
HBAR = 1.054571817e-34  # J*s, 2019 SI

#: Canonical configuration-file keys, their SystemConfig attributes and units.
CONFIG_KEYS = {
    "mirror_radius_m": "mirror_radius",
    "mirror_mass_kg": "mirror_mass",
    "rotation_frequency_rad_s": "rotation_frequency",
    "quality_factor": "quality_factor",
    "cavity_length_m": "cavity_length",
    "finesse_1": "finesse1",
    "finesse_2": "finesse2",
    "drive1_power_w": "drive1_power",
    "drive2_power_w": "drive2_power",
    "probe_power_w": "probe_power",
    "drive1_wavelength_m": "drive1_wavelength",
    "drive2_wavelength_m": "drive2_wavelength",
    "detuning1_rad_s": "detuning1",
    "detuning2_effective_rad_s": None,  # tagged choice, handled specially
    "detuning2_bare_rad_s": None,
    "charge_l1": "charge_l1",
    "charge_l2": "charge_l2",
}


@dataclass(frozen=True)
class Detuning2Spec:
    """Tagged choice for how cavity 2's detuning is specified.

    mode "effective": value is the effective detuning Delta_2 (default 0,
    resonantly driven).  mode "bare": value is the bare detuning Delta_c2
    and the full two-variable self-consistency applies.
    """

    mode: str = "effective"
    value: float = 0.0

    def __post_init__(self):
        if self.mode not in ("effective", "bare"):
            raise ValueError(f"detuning2 mode must be 'effective' or 'bare', got {self.mode!r}")


@dataclass(frozen=True)
class Violation:
    field: str
    message: str

    def __str__(self):
        return f"{self.field}: {self.message}"


@dataclass(frozen=True)
class SystemConfig:
    """Lab-style inputs for the double rotational-cavity system."""

    mirror_radius: float = 10e-6  # R [m]
    mirror_mass: float = 100e-12  # M [kg]
    rotation_frequency: float = 2 * math.pi * 10e6  # omega_phi [rad/s]
    quality_factor: float = 2e6  # Q_phi
    cavity_length: float = 5e-3  # L [m]
    finesse1: float = 5e4
    finesse2: float = 5e4
    drive1_power: float = 0.1e-6  # P1 [W]
    drive2_power: float = 0.1  # P2 [W]
    probe_power: float = 1e-13  # Pp [W]
    drive1_wavelength: float = 1064e-9  # lambda1 [m]
    drive2_wavelength: float | None = None  # defaults to lambda1
    detuning1: float = 2 * math.pi * 10e6  # bare Delta_c1 [rad/s], red-detuned
    detuning2: Detuning2Spec = field(default_factory=Detuning2Spec)
    charge_l1: int = 50
    charge_l2: int = 100

    @property
    def wavelength2(self) -> float:
        return self.drive1_wavelength if self.drive2_wavelength is None else self.drive2_wavelength


@dataclass(frozen=True)
class SystemParams:
    """Derived physical constants plus a copy of the originating config.

    Amplitudes eps1/eps2/eps_p are photon-flux amplitudes, sqrt(photons)/s.
    """

    kappa1: float
    kappa2: float
    g1: float
    g2: float
    inertia: float
    gamma_phi: float
    eps1: float
    eps2: float
    eps_p: float
    omega1: float
    omega2: float
    hbar: float
    light_speed: float
    config: SystemConfig

    @property
    def omega_phi(self) -> float:
        return self.config.rotation_frequency

    @property
    def detuning1(self) -> float:
        return self.config.detuning1

    @property
    def detuning2(self) -> Detuning2Spec:
        return self.config.detuning2


def validate(config: SystemConfig) -> list[Violation]:
    """Check every type invariant; returns an empty list iff the config is usable.

    Total function: never raises, names the offending field in each violation.
    """
    v = []
    positive = [
        ("mirror_radius", config.mirror_radius),
        ("mirror_mass", config.mirror_mass),
        ("rotation_frequency", config.rotation_frequency),
        ("quality_factor", config.quality_factor),
        ("cavity_length", config.cavity_length),
        ("finesse1", config.finesse1),
        ("finesse2", config.finesse2),
        ("drive1_wavelength", config.drive1_wavelength),
    ]
    for name, val in positive:
        if not (isinstance(val, (int, float)) and not isinstance(val, bool)) or not math.isfinite(val):
            v.append(Violation(name, f"must be a finite number, got {val!r}"))
        elif val <= 0:
            v.append(Violation(name, f"must be strictly positive, got {val!r}"))
    if config.drive2_wavelength is not None:
        w2 = config.drive2_wavelength
        if not isinstance(w2, (int, float)) or isinstance(w2, bool) or not math.isfinite(w2) or w2 <= 0:
            v.append(Violation("drive2_wavelength", f"must be strictly positive, got {w2!r}"))
    for name, val in [
        ("drive1_power", config.drive1_power),
        ("drive2_power", config.drive2_power),
        ("probe_power", config.probe_power),
    ]:
        if not isinstance(val, (int, float)) or isinstance(val, bool) or not math.isfinite(val):
            v.append(Violation(name, f"must be a finite number, got {val!r}"))
        elif val < 0:
            v.append(Violation(name, f"must be non-negative, got {val!r}"))
    for name, val in [("charge_l1", config.charge_l1), ("charge_l2", config.charge_l2)]:
        if isinstance(val, bool) or not isinstance(val, int):
            v.append(Violation(name, f"topological charge must be an integer, got {val!r}"))
    for name, val in [("detuning1", config.detuning1), ("detuning2", config.detuning2.value)]:
        if not isinstance(val, (int, float)) or isinstance(val, bool) or not math.isfinite(val):
            v.append(Violation(name, f"must be a finite number, got {val!r}"))
    return v


def derive_params(config: SystemConfig) -> SystemParams:
    """Derive decay rates, couplings and drive amplitudes from a valid config.

    Deterministic and pure: identical configs give bit-identical SystemParams.

    Raises
    ------
    ConfigError
        if `validate(config)` reports any violation.
    """
    from .errors import ConfigError

    violations = validate(config)
    if violations:
        raise ConfigError(violations)

    c = SPEED_OF_LIGHT
    L = config.cavity_length
    kappa1 = math.pi * c / (2.0 * L * config.finesse1)
    kappa2 = math.pi * c / (2.0 * L * config.finesse2)
    g1 = c * config.charge_l1 / L
    g2 = c * config.charge_l2 / L
    inertia = config.mirror_mass * config.mirror_radius**2 / 2.0
    gamma_phi = config.rotation_frequency / config.quality_factor
    omega1 = 2.0 * math.pi * c / config.drive1_wavelength
    omega2 = 2.0 * math.pi * c / config.wavelength2
    eps1 = math.sqrt(2.0 * kappa1 * config.drive1_power / (HBAR * omega1))
    eps2 = math.sqrt(2.0 * kappa2 * config.drive2_power / (HBAR * omega2))
    # probe frequency approximated by omega_1 (relative error Omega/omega_1)
    eps_p = math.sqrt(2.0 * kappa1 * config.probe_power / (HBAR * omega1))
    return SystemParams(
        kappa1=kappa1,
        kappa2=kappa2,
        g1=g1,
        g2=g2,
        inertia=inertia,
        gamma_phi=gamma_phi,
        eps1=eps1,
        eps2=eps2,
        eps_p=eps_p,
        omega1=omega1,
        omega2=omega2,
        hbar=HBAR,
        light_speed=c,
        config=config,
    )


def canonical_dict(config: SystemConfig) -> dict:
    """Canonical key/value form of all physical inputs, SI units."""
    d = {
        "mirror_radius_m": float(config.mirror_radius),
        "mirror_mass_kg": float(config.mirror_mass),
        "rotation_frequency_rad_s": float(config.rotation_frequency),
        "quality_factor": float(config.quality_factor),
        "cavity_length_m": float(config.cavity_length),
        "finesse_1": float(config.finesse1),
        "finesse_2": float(config.finesse2),
        "drive1_power_w": float(config.drive1_power),
        "drive2_power_w": float(config.drive2_power),
        "probe_power_w": float(config.probe_power),
        "drive1_wavelength_m": float(config.drive1_wavelength),
        "drive2_wavelength_m": float(config.wavelength2),
        "detuning1_rad_s": float(config.detuning1),
        "charge_l1": int(config.charge_l1),
        "charge_l2": int(config.charge_l2),
    }
    if config.detuning2.mode == "effective":
        d["detuning2_effective_rad_s"] = float(config.detuning2.value)
    else:
        d["detuning2_bare_rad_s"] = float(config.detuning2.value)
    return d


def fingerprint(config: SystemConfig, *, mask_charge_l1: bool = False) -> str:
    """Stable hash of all physical inputs in canonical unit form.

    With `mask_charge_l1` the first topological charge is zeroed before
    hashing; calibration curves use this so that one fingerprint covers
    every charge on the curve.
    """
    d = canonical_dict(config)
    if mask_charge_l1:
        d["charge_l1"] = 0
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"), default=repr)
    return hashlib.sha256(blob.encode("ascii")).hexdigest()


def config_from_dict(raw: dict) -> SystemConfig:
    """Build a SystemConfig from a canonical key/value mapping.

    Unknown keys are a hard error.  Integrality of the charges and the
    exclusivity of the two detuning-2 specifications are enforced here;
    everything else is left to `validate`.
    """
    from .errors import ConfigError

    violations = []
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    for key in unknown:
        violations.append(Violation(key, "unknown configuration key"))
    if "detuning2_effective_rad_s" in raw and "detuning2_bare_rad_s" in raw:
        violations.append(
            Violation("detuning2", "give either detuning2_effective_rad_s or detuning2_bare_rad_s, not both")
        )
    if violations:
        raise ConfigError(violations)

    kwargs = {}
    for key, attr in CONFIG_KEYS.items():
        if attr is None or key not in raw:
            continue
        val = raw[key]
        if key in ("charge_l1", "charge_l2"):
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                violations.append(Violation(key, f"topological charge must be an integer, got {val!r}"))
                continue
            if isinstance(val, float):
                if not val.is_integer():
                    violations.append(Violation(key, f"topological charge must be an integer, got {val!r}"))
                    continue
                val = int(val)
        kwargs[attr] = val
    if violations:
        raise ConfigError(violations)

    if "detuning2_bare_rad_s" in raw:
        kwargs["detuning2"] = Detuning2Spec("bare", float(raw["detuning2_bare_rad_s"]))
    elif "detuning2_effective_rad_s" in raw:
        kwargs["detuning2"] = Detuning2Spec("effective", float(raw["detuning2_effective_rad_s"]))
    return SystemConfig(**kwargs)


def load_config(path) -> SystemConfig:
    """Read one JSON config document from `path`."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        from .errors import ConfigError

        raise ConfigError([Violation("<document>", "config file must contain a single JSON object")])
    return config_from_dict(raw)


def default_config(**overrides) -> SystemConfig:
    """Default lab configuration (weak-probe measurement regime)."""
    cfg = SystemConfig()
    return replace(cfg, **overrides) if overrides else cfg
