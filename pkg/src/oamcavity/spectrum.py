"""Transmission spectra, resonance-valley location and linewidths.

The valley is the interior minimum of T(x) with positive discrete
curvature, x = (Omega - omega_phi)/omega_phi.  Location uses a coarse
grid followed by derivative-free golden-section refinement; the Fano-like
shoulders make curvature-based methods ill-conditioned, so no derivatives
are trusted anywhere here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DipTooShallow, NoInteriorMinimum
from .params import SystemParams, fingerprint
from .response import TransmissionPoint, transmission_at, transmission_many
from .steady import SteadyState

DEFAULT_WINDOW = (-0.2, 0.2)
MAX_ABS_X = 2.0
COARSE_POINTS = 1024
X_TOL = 1e-9
DEPTH_FLOOR = 1e-3
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Spectrum:
    points: tuple[TransmissionPoint, ...]
    params_fingerprint: str
    branch_tag: str

    @property
    def xs(self) -> np.ndarray:
        return np.array([p.x for p in self.points])

    @property
    def transmissions(self) -> np.ndarray:
        return np.array([p.transmission for p in self.points])


@dataclass(frozen=True)
class ValleyReport:
    x_star: float
    t_min: float
    curvature_sign_ok: bool
    fwhm: float | None  # None when the dip is too shallow to measure
    window: tuple[float, float]


def sample_spectrum(
    params: SystemParams,
    steady: SteadyState,
    x_lo: float,
    x_hi: float,
    n: int,
) -> Spectrum:
    """n uniform transmission samples of T(Omega = omega_phi*(1+x)) on [x_lo, x_hi]."""
    if not x_lo < x_hi:
        raise ValueError(f"need x_lo < x_hi, got [{x_lo}, {x_hi}]")
    if n < 3:
        raise ValueError(f"need at least 3 samples, got {n}")
    xs = np.linspace(x_lo, x_hi, n)
    omegas = params.omega_phi * (1.0 + xs)
    ts = transmission_many(params, steady, omegas)
    pts = tuple(
        TransmissionPoint(omega=float(om), x=float(x), transmission=float(t))
        for om, x, t in zip(omegas, xs, ts)
    )
    return Spectrum(
        points=pts,
        params_fingerprint=fingerprint(params.config),
        branch_tag=steady.branch_tag,
    )


def _t_of_x(params: SystemParams, steady: SteadyState, x: float) -> float:
    return transmission_at(params, steady, params.omega_phi * (1.0 + x))


def _golden_min(f, a: float, b: float, tol: float) -> float:
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def find_valley(
    params: SystemParams,
    steady: SteadyState,
    window: tuple[float, float] = DEFAULT_WINDOW,
    n_coarse: int = COARSE_POINTS,
) -> ValleyReport:
    """Locate the resonance valley: dT/dx = 0 with d2T/dx2 > 0.

    Coarse grid (1024 points) plus golden-section refinement to 1e-9
    absolute in x.  If the coarse minimum lands on a window boundary the
    window is doubled, up to |x| <= 2, before giving up.

    Raises
    ------
    NoInteriorMinimum
        flat or boundary-running spectra after maximal expansion.
    """
    x_lo, x_hi = window
    if not x_lo < x_hi:
        raise ValueError(f"invalid window [{x_lo}, {x_hi}]")

    while True:
        xs = np.linspace(x_lo, x_hi, n_coarse)
        ts = transmission_many(params, steady, params.omega_phi * (1.0 + xs))
        i = int(np.argmin(ts))
        flat = float(ts.max() - ts.min()) <= 1e-13 * max(1.0, float(np.abs(ts).max()))
        if not flat and 0 < i < n_coarse - 1:
            break
        if x_lo <= -MAX_ABS_X and x_hi >= MAX_ABS_X:
            raise NoInteriorMinimum(
                f"no interior transmission minimum on [{x_lo}, {x_hi}] "
                f"(T range [{ts.min():.6e}, {ts.max():.6e}])"
            )
        half = x_hi - x_lo  # doubling the window width
        x_lo = max(x_lo - half / 2.0, -MAX_ABS_X)
        x_hi = min(x_hi + half / 2.0, MAX_ABS_X)

    f = lambda x: _t_of_x(params, steady, x)
    x_star = _golden_min(f, float(xs[i - 1]), float(xs[i + 1]), X_TOL)
    t_min = f(x_star)

    # discrete second difference at the converged minimum
    h = max(10.0 * X_TOL, 1e-8)
    curvature = f(x_star - h) + f(x_star + h) - 2.0 * t_min
    if not curvature > 0.0:
        raise NoInteriorMinimum(
            f"refined point x = {x_star:.6e} has non-positive discrete curvature"
        )

    report = ValleyReport(
        x_star=x_star,
        t_min=t_min,
        curvature_sign_ok=True,
        fwhm=None,
        window=(x_lo, x_hi),
    )
    # a dip shallower than the floor relative to the coarse-window median
    # can never yield a linewidth; skip the adaptive measurement entirely
    if t_min > float(np.median(ts)) - DEPTH_FLOOR:
        return report
    try:
        fwhm = _measure_fwhm(params, steady, report)
    except DipTooShallow:
        return report
    return replace(report, fwhm=fwhm)


def linewidth(spectrum: Spectrum, valley: ValleyReport) -> float:
    """Full width at half depth of the valley within a sampled spectrum.

    The baseline is the median transmission of the outer 10% of samples
    (robust to Fano asymmetry); the two crossings of
    T = (baseline + T_min)/2 are located by linear interpolation.

    Raises
    ------
    DipTooShallow
        when T_min is within DEPTH_FLOOR of the baseline.
    """
    xs = spectrum.xs
    ts = spectrum.transmissions
    n = len(xs)
    k = max(1, int(round(0.05 * n)))
    baseline = float(np.median(np.concatenate([ts[:k], ts[-k:]])))
    t_min = valley.t_min
    if not t_min < baseline - DEPTH_FLOOR:
        raise DipTooShallow(
            f"dip depth {baseline - t_min:.3e} below floor {DEPTH_FLOOR:g} "
            f"(baseline {baseline:.6f}, T_min {t_min:.6f})"
        )
    half = 0.5 * (baseline + t_min)

    i0 = int(np.argmin(np.abs(xs - valley.x_star)))

    def cross(direction: int) -> float:
        i = i0
        while 0 <= i + direction < n:
            j = i + direction
            if (ts[i] - half) * (ts[j] - half) <= 0.0 and ts[i] != ts[j]:
                frac = (half - ts[i]) / (ts[j] - ts[i])
                return float(xs[i] + frac * (xs[j] - xs[i]))
            i = j
        raise ValueError(
            "half-depth crossing not inside the sampled window; widen the spectrum"
        )

    return cross(+1) - cross(-1)


def _measure_fwhm(
    params: SystemParams,
    steady: SteadyState,
    valley: ValleyReport,
    n: int = 2048,
) -> float:
    """Adaptive local linewidth: grow a sampling window around the dip.

    Starting narrow guarantees the dip is always well resolved; the window
    is widened until both half-depth crossings fall inside it.  Shallow
    dips are only classified as such once the window is wide enough that
    the outer-sample baseline is trustworthy.
    """
    def attempt(width: float) -> float:
        spec = sample_spectrum(
            params, steady, valley.x_star - width, valley.x_star + width, n
        )
        return linewidth(spec, valley)

    width = max(64.0 * X_TOL, 1e-8)
    last_err: Exception | None = None
    w = None
    while width <= 2.0 * MAX_ABS_X:
        try:
            w = attempt(width)
        except (DipTooShallow, ValueError) as err:
            # too small a window sees the dip's own floor as baseline, or
            # the crossings escape it; either way keep widening
            last_err = err
            width *= 4.0
            continue
        break
    if w is None:
        if isinstance(last_err, DipTooShallow):
            raise last_err
        raise DipTooShallow(f"could not bracket half-depth crossings: {last_err}")

    # iterate the window to ~8x the measured width so the baseline samples
    # sit clear of the dip's own tails; converges in a couple of passes
    for _ in range(6):
        target = min(8.0 * w, 2.0 * MAX_ABS_X)
        try:
            w_new = attempt(target)
        except (DipTooShallow, ValueError):
            break
        done = abs(w_new - w) <= 5e-3 * w
        w = w_new
        if done:
            break
    return w


def shift_distance(
    params_template: SystemParams,
    l1: int,
    delta2_scan,
    window: tuple[float, float] = DEFAULT_WINDOW,
):
    """Spectral shift distance d = |x*(l1+1) - x*(l1)| per scanned Delta_2.

    Returns a list of rows (delta2_over_omega, d, valid); rows where a
    valley cannot be located are marked invalid and the scan continues.
    """
    from dataclasses import replace as dc_replace

    from .errors import NoConvergence, SingularSystem
    from .params import Detuning2Spec, derive_params
    from .steady import solve_steady

    rows = []
    for d2 in delta2_scan:
        try:
            xs = []
            for charge in (l1, l1 + 1):
                cfg = dc_replace(
                    params_template.config,
                    charge_l1=charge,
                    detuning2=Detuning2Spec("effective", float(d2)),
                )
                p = derive_params(cfg)
                rep = solve_steady(p)
                if rep.multistable:
                    raise NoInteriorMinimum("multistable steady state in scan row")
                xs.append(find_valley(p, rep.selected, window).x_star)
            rows.append((d2 / params_template.omega_phi, abs(xs[1] - xs[0]), True))
        except (NoInteriorMinimum, DipTooShallow, NoConvergence, SingularSystem):
            rows.append((d2 / params_template.omega_phi, float("nan"), False))
    return rows
