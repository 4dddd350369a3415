"""Brute-force validation path: full nonlinear time-domain integration.

Integrates the mean-value equations exactly as written, with the probe
term and every nonlinear product retained, from bare detunings (the
effective ones must come out, not go in).  A lock-in style projection of
the settled tail onto {1, e^{-i*Omega*t}, e^{+i*Omega*t}} then extracts
the dc amplitude and the two probe sidebands independently of any
linearization.

This path is expensive: the mechanical damping time 1/gamma_phi is the
slow scale (tens of ms at the default quality factor), so structural
checks run with a lowered Q_phi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import PoorFit, StepSizeUnderflow, WindowTooShort
from .params import SystemParams

DEFAULT_TOL = 1e-10
POOR_FIT_THRESHOLD = 1e-2
MIN_PERIODS = 10
_SAMPLES_PER_PERIOD = 32
_MAX_SAMPLES = 65536


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    phi: np.ndarray
    phi_dot: np.ndarray
    stats: dict

    def __post_init__(self):
        n = len(self.times)
        if not (len(self.c1) == len(self.c2) == len(self.phi) == len(self.phi_dot) == n):
            raise ValueError("trajectory series lengths differ")
        if n > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")


@dataclass(frozen=True)
class DemodulationResult:
    c1s_est: complex
    c1_plus_est: complex
    c1_minus_est: complex
    fit_residual_rms: float


def default_t_end(params: SystemParams) -> float:
    """20 mechanical damping times, capped at 1e7 mechanical periods."""
    return min(20.0 / params.gamma_phi, 1e7 * 2.0 * math.pi / params.omega_phi)


def integrate_mean_field(
    params: SystemParams,
    bare_detunings: tuple[float, float],
    initial_state,
    t_end: float,
    omega_probe: float,
    tol: float = DEFAULT_TOL,
    eps_p_scale: float = 1.0,
) -> Trajectory:
    """Adaptive RK5(4) integration of the coupled mean-value equations.

    Parameters
    ----------
    bare_detunings : (Delta_c1, Delta_c2)
        Bare cavity-drive detunings; the oracle never consumes effective ones.
    initial_state : (c1, c2, phi, phi_dot) or None for the undriven vacuum.
    omega_probe : float
        Probe-drive detuning Omega of the e^{-i*Omega*t} probe term.
    eps_p_scale : float
        Multiplies the configured probe amplitude (0 turns the probe off).

    Raises
    ------
    StepSizeUnderflow
        stiff blowup; carries the divergence time.
    """
    dc1, dc2 = bare_detunings
    k1, k2 = params.kappa1, params.kappa2
    g1, g2 = params.g1, params.g2
    e1, e2 = params.eps1, params.eps2
    ep = eps_p_scale * params.eps_p
    gam, om2 = params.gamma_phi, params.omega_phi**2
    hbar_i = params.hbar / params.inertia
    omp = omega_probe

    def rhs(t, y):
        c1r, c1i, c2r, c2i, phi, phid = y
        d1 = dc1 + g1 * phi
        d2 = dc2 - g2 * phi
        drive_r = e1 + ep * math.cos(omp * t)
        drive_i = -ep * math.sin(omp * t)
        dc1r = -k1 * c1r + d1 * c1i + drive_r
        dc1i = -k1 * c1i - d1 * c1r + drive_i
        dc2r = -k2 * c2r + d2 * c2i + e2
        dc2i = -k2 * c2i - d2 * c2r
        torque = hbar_i * (g1 * (c1r * c1r + c1i * c1i) - g2 * (c2r * c2r + c2i * c2i))
        dphid = -gam * phid - om2 * phi - torque
        return (dc1r, dc1i, dc2r, dc2i, phid, dphid)

    if initial_state is None:
        y0 = np.zeros(6)
    else:
        c1_0, c2_0, phi_0, phid_0 = initial_state
        y0 = np.array([c1_0.real, c1_0.imag, c2_0.real, c2_0.imag, phi_0, phid_0])

    amp1 = (e1 + ep) / k1
    amp2 = e2 / k2
    phi_scale = params.hbar * (abs(g1) * amp1**2 + abs(g2) * amp2**2) / (params.inertia * om2)
    atol = tol * np.array(
        [
            max(amp1, 1e-6),
            max(amp1, 1e-6),
            max(amp2, 1e-6),
            max(amp2, 1e-6),
            max(phi_scale, 1e-15),
            max(phi_scale * math.sqrt(om2), 1e-9),
        ]
    )
    sol = solve_ivp(rhs, (0.0, t_end), y0, method="RK45", rtol=tol, atol=atol, dense_output=False)
    if not sol.success:
        raise StepSizeUnderflow(
            f"integration failed at t = {sol.t[-1]:.6e} s: {sol.message}",
            t_divergence=float(sol.t[-1]),
        )
    accepted = len(sol.t) - 1
    rejected_est = max(0, (sol.nfev - 1) // 6 - accepted)
    return Trajectory(
        times=sol.t,
        c1=sol.y[0] + 1j * sol.y[1],
        c2=sol.y[2] + 1j * sol.y[3],
        phi=sol.y[4],
        phi_dot=sol.y[5],
        stats={
            "steps": accepted,
            "rejected_steps_estimate": rejected_est,
            "nfev": sol.nfev,
            "rtol": tol,
            "atol": atol.tolist(),
        },
    )


def demodulate(trajectory: Trajectory, omega: float, window: tuple[float, float]) -> DemodulationResult:
    """Project c1(t) onto {1, e^{-i*omega*t}, e^{+i*omega*t}} over a window.

    The window is snapped to a whole number of beat periods (ending at its
    right edge) and must cover at least 10 of them; the trajectory is
    resampled onto a uniform grid with cubic interpolation first, so the
    projection is independent of the adaptive step placement.

    Raises
    ------
    WindowTooShort
        fewer than 10 whole beat periods in the window.
    PoorFit
        relative residual above 1e-2: higher harmonics present, probe too strong.
    """
    t0, t1 = window
    if omega <= 0:
        raise ValueError("demodulation frequency must be positive")
    period = 2.0 * math.pi / omega
    n_per = int(math.floor((t1 - t0) / period))
    if n_per < MIN_PERIODS:
        raise WindowTooShort(
            f"window holds {n_per} whole beat periods, need at least {MIN_PERIODS}"
        )
    t_start = t1 - n_per * period
    if t_start < trajectory.times[0] or t1 > trajectory.times[-1] * (1 + 1e-12):
        raise ValueError("window extends beyond the trajectory")

    n_samples = min(_SAMPLES_PER_PERIOD * n_per, _MAX_SAMPLES)
    ts = np.linspace(t_start, min(t1, trajectory.times[-1]), n_samples)
    spline_r = CubicSpline(trajectory.times, trajectory.c1.real)
    spline_i = CubicSpline(trajectory.times, trajectory.c1.imag)
    c1 = spline_r(ts) + 1j * spline_i(ts)

    basis = np.column_stack(
        [np.ones_like(ts), np.exp(-1j * omega * ts), np.exp(1j * omega * ts)]
    )
    coef, *_ = np.linalg.lstsq(basis, c1, rcond=None)
    resid = c1 - basis @ coef
    rms = float(np.sqrt(np.mean(np.abs(resid) ** 2)))
    c1s_est, c1_plus, c1_minus = (complex(z) for z in coef)
    denom = abs(c1_plus)
    rel = rms / denom if denom > 0 else math.inf if rms > 0 else 0.0
    if rel > POOR_FIT_THRESHOLD:
        raise PoorFit(
            f"relative fit residual {rel:.3e} above {POOR_FIT_THRESHOLD:g}; "
            "higher harmonics present (probe too strong)"
        )
    return DemodulationResult(
        c1s_est=c1s_est,
        c1_plus_est=c1_plus,
        c1_minus_est=c1_minus,
        fit_residual_rms=rel,
    )


def transmission_oracle(
    params: SystemParams,
    bare_detunings: tuple[float, float],
    omega: float,
    t_end: float | None = None,
    tol: float = DEFAULT_TOL,
    n_periods: int = 20,
    initial_state=None,
) -> float:
    """End-to-end oracle transmission: integrate, demodulate, apply the output relation.

    With both drives on, fixed bare detunings can admit a dark root that a
    vacuum start relaxes to; pass the intended operating point as
    `initial_state` to probe a specific branch.
    """
    if t_end is None:
        t_end = default_t_end(params)
    traj = integrate_mean_field(params, bare_detunings, initial_state, t_end, omega, tol=tol)
    window = (t_end - (n_periods + 1) * 2.0 * math.pi / omega, t_end)
    demod = demodulate(traj, omega, window)
    return abs(1.0 - 2.0 * params.kappa1 * demod.c1_plus_est / params.eps_p) ** 2


def dump_trajectory_csv(trajectory: Trajectory, path) -> None:
    """Debug dump: t, Re c1, Im c1, Re c2, Im c2, phi, dphi/dt."""
    header = "t,re_c1,im_c1,re_c2,im_c2,phi,phi_dot"
    data = np.column_stack(
        [
            trajectory.times,
            trajectory.c1.real,
            trajectory.c1.imag,
            trajectory.c2.real,
            trajectory.c2.imag,
            trajectory.phi,
            trajectory.phi_dot,
        ]
    )
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.16e")
