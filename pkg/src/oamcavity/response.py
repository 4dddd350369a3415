"""First-order sideband response of the system to the weak probe.

Substituting delta_O = O_+ e^{-i*Omega*t} + O_- e^{+i*Omega*t} into the
linearized fluctuation equations (quadratic fluctuation products dropped)
and collecting both harmonics closes a complex linear system in

    (c1+, c1-*, c2+, c2-*, phi+, phi-*)

with the probe drive entering only the c1+ row.  The two mechanical rows
are conjugate images of one another, so phi_- = conj(phi_+) must emerge
from the solve; it is returned and checked rather than assumed.

The closed-form single-amplitude expression (D1..D4 form) is kept as an
independent cross-check of c1+ only; the linear solve is authoritative.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularSystem
from .params import SystemParams
from .steady import SteadyState

_log = logging.getLogger(__name__)

#: |det| below this fraction of the row-norm product means singular
DET_THRESHOLD = 1e-30
#: T above this is flagged (not raised) as probe gain
GAIN_FLOOR = 1.0 + 1e-6


@dataclass(frozen=True)
class ProbeResponse:
    """Sideband amplitudes at one probe-drive detuning Omega."""

    omega: float
    c1_plus: complex
    c1_minus_conj: complex
    c2_plus: complex
    c2_minus_conj: complex
    phi_plus: complex
    phi_minus_conj: complex
    condition_estimate: float


@dataclass(frozen=True)
class TransmissionPoint:
    omega: float  # probe-drive detuning Omega [rad/s]
    x: float  # (Omega - omega_phi)/omega_phi
    transmission: float


def _system_matrix(params: SystemParams, steady: SteadyState, omega: float):
    k1, k2 = params.kappa1, params.kappa2
    g1, g2 = params.g1, params.g2
    d1, d2 = steady.delta1, steady.delta2
    c1s, c2s = steady.c1, steady.c2
    hg1 = params.hbar * g1 / params.inertia
    hg2 = params.hbar * g2 / params.inertia
    mech = params.omega_phi**2 - omega**2 - 1j * params.gamma_phi * omega

    a = np.zeros((6, 6), dtype=complex)
    b = np.zeros(6, dtype=complex)
    # c1+ row (probe drive lives here)
    a[0, 0] = k1 + 1j * (d1 - omega)
    a[0, 4] = 1j * g1 * c1s
    b[0] = params.eps_p
    # conj of the c1- row
    a[1, 1] = k1 - 1j * (d1 + omega)
    a[1, 5] = -1j * g1 * np.conj(c1s)
    # c2+ row
    a[2, 2] = k2 + 1j * (d2 - omega)
    a[2, 4] = -1j * g2 * c2s
    # conj of the c2- row
    a[3, 3] = k2 - 1j * (d2 + omega)
    a[3, 5] = 1j * g2 * np.conj(c2s)
    # mechanical rows: e^{-i Omega t} harmonic, then the conjugated e^{+i Omega t} one
    for row, phicol in ((4, 4), (5, 5)):
        a[row, 0] = hg1 * np.conj(c1s)
        a[row, 1] = hg1 * c1s
        a[row, 2] = -hg2 * np.conj(c2s)
        a[row, 3] = -hg2 * c2s
        a[row, phicol] = mech
    return a, b


def sideband_response(params: SystemParams, steady: SteadyState, omega: float) -> ProbeResponse:
    """Solve the sideband system at probe-drive detuning Omega.

    Partial-pivot LU on the row/column-equilibrated matrix, one step of
    iterative refinement.  A conditioning estimate of the equilibrated
    system is returned for diagnostics.

    Raises
    ------
    SingularSystem
        when the equilibrated determinant falls below 1e-30 of the
        row-norm product (a parametric-instability point).
    """
    if not math.isfinite(omega):
        raise ValueError(f"probe detuning must be finite, got {omega!r}")
    a, b = _system_matrix(params, steady, omega)

    # equilibrate with powers of two (exact in binary floating point)
    row_norm = np.max(np.abs(a), axis=1)
    row_scale = np.exp2(-np.round(np.log2(np.where(row_norm > 0, row_norm, 1.0))))
    a_s = a * row_scale[:, None]
    col_norm = np.max(np.abs(a_s), axis=0)
    col_scale = np.exp2(-np.round(np.log2(np.where(col_norm > 0, col_norm, 1.0))))
    a_s = a_s * col_scale[None, :]
    b_s = b * row_scale

    sign, logdet = np.linalg.slogdet(a_s)
    rownorms = np.max(np.abs(a_s), axis=1)
    log_thresh = math.log(DET_THRESHOLD) + float(np.sum(np.log(np.where(rownorms > 0, rownorms, 1.0))))
    if sign == 0 or logdet < log_thresh:
        raise SingularSystem(
            f"sideband system singular at Omega = {omega:.6e} rad/s "
            f"(log|det| = {logdet:.2f} below threshold {log_thresh:.2f})"
        )

    y = np.linalg.solve(a_s, b_s)
    y += np.linalg.solve(a_s, b_s - a_s @ y)  # one refinement step
    u = y * col_scale

    cond = float(np.linalg.cond(a_s))
    return ProbeResponse(
        omega=omega,
        c1_plus=complex(u[0]),
        c1_minus_conj=complex(u[1]),
        c2_plus=complex(u[2]),
        c2_minus_conj=complex(u[3]),
        phi_plus=complex(u[4]),
        phi_minus_conj=complex(u[5]),
        condition_estimate=cond,
    )


def closed_form_c1p(params: SystemParams, steady: SteadyState, omega: float) -> complex:
    """Closed-form c1+ (cross-check only; the linear solve is authoritative).

    Intracavity photon numbers are read as N1 = |c1s|^2, N2 = |c2s|^2 and
    the inertia factor as the mirror's moment of inertia; this reading is
    validated against `sideband_response` by the test suite.
    """
    k1, k2 = params.kappa1, params.kappa2
    d1, d2 = steady.delta1, steady.delta2
    n1, n2 = steady.n1, steady.n2
    g1s = params.g1**2
    g2s = params.g2**2
    hbar = params.hbar
    inertia = params.inertia

    p1 = d1**2 + (k1 - 1j * omega) ** 2
    p2 = d2**2 + (k2 - 1j * omega) ** 2
    mech = omega**2 - params.omega_phi**2 + 1j * params.gamma_phi * omega
    d1f = (d1 + omega + 1j * k1) / p2
    d2f = (d1 + omega + 1j * k1) * mech
    d3f = p1 / p2
    d4f = p1 * mech

    num = n1 * g1s * hbar + 2.0 * n2 * d2 * g2s * hbar * d1f + inertia * d2f
    den = 2.0 * n1 * d1 * g1s * hbar + 2.0 * n2 * d2 * g2s * hbar * d3f + inertia * d4f
    scale = abs(2.0 * n1 * d1 * g1s * hbar) + abs(2.0 * n2 * d2 * g2s * hbar * d3f) + abs(inertia * d4f)
    if abs(den) <= DET_THRESHOLD * max(scale, 1.0):
        raise SingularSystem(f"closed-form denominator vanished at Omega = {omega:.6e} rad/s")
    return -1j * params.eps_p * num / den


def transmission(params: SystemParams, c1_plus: complex, eps_p: float | None = None) -> float:
    """Probe transmission T = |1 - 2*kappa1*c1+/eps_p|^2.

    Independent of the absolute probe scale because c1+ is proportional to
    eps_p in the linearized regime.
    """
    if eps_p is None:
        eps_p = params.eps_p
    if not eps_p > 0:
        raise ValueError("probe amplitude must be positive")
    t = abs(1.0 - 2.0 * params.kappa1 * c1_plus / eps_p) ** 2
    if t > GAIN_FLOOR:
        _log.info("probe gain regime: T = %.6e", t)
    return t


def transmission_at(params: SystemParams, steady: SteadyState, omega: float) -> float:
    """Convenience: solve the sideband system and map c1+ to T at one Omega."""
    resp = sideband_response(params, steady, omega)
    return transmission(params, resp.c1_plus)


def transmission_point(params: SystemParams, steady: SteadyState, x: float) -> TransmissionPoint:
    """T at the normalized detuning x = (Omega - omega_phi)/omega_phi."""
    omega = params.omega_phi * (1.0 + x)
    return TransmissionPoint(omega=omega, x=x, transmission=transmission_at(params, steady, omega))


def _stacked_system(params: SystemParams, steady: SteadyState, omegas: np.ndarray):
    n = len(omegas)
    k1, k2 = params.kappa1, params.kappa2
    g1, g2 = params.g1, params.g2
    d1, d2 = steady.delta1, steady.delta2
    c1s, c2s = steady.c1, steady.c2
    hg1 = params.hbar * g1 / params.inertia
    hg2 = params.hbar * g2 / params.inertia
    mech = params.omega_phi**2 - omegas**2 - 1j * params.gamma_phi * omegas

    a = np.zeros((n, 6, 6), dtype=complex)
    b = np.zeros((n, 6), dtype=complex)
    a[:, 0, 0] = k1 + 1j * (d1 - omegas)
    a[:, 0, 4] = 1j * g1 * c1s
    b[:, 0] = params.eps_p
    a[:, 1, 1] = k1 - 1j * (d1 + omegas)
    a[:, 1, 5] = -1j * g1 * np.conj(c1s)
    a[:, 2, 2] = k2 + 1j * (d2 - omegas)
    a[:, 2, 4] = -1j * g2 * c2s
    a[:, 3, 3] = k2 - 1j * (d2 + omegas)
    a[:, 3, 5] = 1j * g2 * np.conj(c2s)
    for row, phicol in ((4, 4), (5, 5)):
        a[:, row, 0] = hg1 * np.conj(c1s)
        a[:, row, 1] = hg1 * c1s
        a[:, row, 2] = -hg2 * np.conj(c2s)
        a[:, row, 3] = -hg2 * c2s
        a[:, row, phicol] = mech
    return a, b


def c1_plus_many(params: SystemParams, steady: SteadyState, omegas) -> np.ndarray:
    """Vectorized c1+ over many probe detunings (same algorithm as the scalar path).

    Raises SingularSystem naming the first offending detuning.
    """
    omegas = np.asarray(omegas, dtype=float)
    a, b = _stacked_system(params, steady, omegas)
    row_norm = np.max(np.abs(a), axis=2)
    row_scale = np.exp2(-np.round(np.log2(np.where(row_norm > 0, row_norm, 1.0))))
    a_s = a * row_scale[:, :, None]
    col_norm = np.max(np.abs(a_s), axis=1)
    col_scale = np.exp2(-np.round(np.log2(np.where(col_norm > 0, col_norm, 1.0))))
    a_s = a_s * col_scale[:, None, :]
    b_s = b * row_scale

    sign, logdet = np.linalg.slogdet(a_s)
    rownorms = np.max(np.abs(a_s), axis=2)
    log_thresh = math.log(DET_THRESHOLD) + np.sum(np.log(np.where(rownorms > 0, rownorms, 1.0)), axis=1)
    bad = (sign == 0) | (logdet < log_thresh)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SingularSystem(
            f"sideband system singular at Omega = {omegas[i]:.6e} rad/s"
        )

    y = np.linalg.solve(a_s, b_s[:, :, None])
    resid = b_s[:, :, None] - a_s @ y
    y = y + np.linalg.solve(a_s, resid)
    u0 = y[:, 0, 0] * col_scale[:, 0]
    return u0


def transmission_many(params: SystemParams, steady: SteadyState, omegas) -> np.ndarray:
    """Vectorized T(Omega) for spectrum sampling and grid searches."""
    c1p = c1_plus_many(params, steady, omegas)
    ts = np.abs(1.0 - 2.0 * params.kappa1 * c1p / params.eps_p) ** 2
    n_gain = int(np.sum(ts > GAIN_FLOOR))
    if n_gain:
        _log.info("probe gain regime at %d of %d detunings (max T = %.6e)",
                  n_gain, len(ts), float(ts.max()))
    return ts
