"""
Benchmark systems and their reference solutions.

* resonantly driven two-level atom (pi pulse, closed-form solution)
* linearly driven harmonic oscillator on a Fourier grid (coherent-state oracle)
* two displaced harmonic surfaces coupled by a pump/control pulse pair
  (wave-packet interferometry)
"""
from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .chebyshev import apply_operator_series, scalar_func_series
from .errors import DimensionError, QuadratureError
from .lincore import FourierGrid, GridModel, LevelModel, Pulse, TwoSurfaceModel


# -- two-level atom -------------------------------------------------------------
@dataclass(frozen=True)
class TwoLevelSpec:
    """H = [[0, mu E(t)], [mu E(t), 0]], E(t) = e0 sin^2(pi t / T) / 2.

    ``e0=None`` selects the pi-pulse amplitude e0 = 2 pi / (mu T).
    """

    mu: float = 1.0
    T: float = 9000.0
    e0: float = None

    @property
    def amplitude(self):
        return 2.0 * np.pi / (self.mu * self.T) if self.e0 is None else self.e0


def build_two_level(spec=TwoLevelSpec()):
    h0 = np.zeros((2, 2))
    mu = spec.mu * np.array([[0.0, 1.0], [1.0, 0.0]])
    pulse = Pulse(e0=spec.amplitude, t_env=spec.T, half=True)
    return LevelModel(h0, mu, [pulse])


def two_level_analytic(spec, t):
    """(c_g, c_e) with theta = mu e0 (t - T sin(2 pi t / T) / (2 pi)) / 4."""
    t = np.asarray(t, dtype=float)
    theta = 0.25 * spec.mu * spec.amplitude * (t - spec.T / (2.0 * np.pi) * np.sin(2.0 * np.pi * t / spec.T))
    return np.cos(theta) + 0j, -1j * np.sin(theta)


# -- driven harmonic oscillator ---------------------------------------------------
@dataclass(frozen=True)
class DrivenOscillatorSpec:
    """H = p^2/2m + m omega^2 r^2/2 + r e0 sin^2(pi t/T) cos(omega0 t)."""

    omega0: float = 1.0
    e0: float = 0.1
    mass: float = 1.0
    omega: float = 1.0
    T: float = 100.0
    n_grid: int = 128
    r_max: float = 10.0

    @property
    def grid(self):
        return FourierGrid(self.n_grid, -self.r_max, self.r_max)

    @property
    def pulse(self):
        return Pulse(e0=self.e0, t_env=self.T, omega0=self.omega0)


def build_oscillator(spec=DrivenOscillatorSpec()):
    g = spec.grid
    pot = 0.5 * spec.mass * spec.omega**2 * g.r**2
    return GridModel(g, pot, g.r, mass=spec.mass, pulses=[spec.pulse])


def oscillator_ground_state(spec):
    """Sampled Gaussian ground state, normalised so that sum |psi_i|^2 = 1."""
    r = spec.grid.r
    a = spec.mass * spec.omega
    psi = np.exp(-0.5 * a * r**2).astype(complex)
    return psi / np.linalg.norm(psi)


def _gauss_legendre_cumulative(f, edges, order):
    """Integrals of f over consecutive panels [edges[i], edges[i+1]]."""
    return _gauss_legendre_panels(f, edges[:-1], edges[1:], order)


def _gauss_legendre_panels(f, a, b, order):
    """Integrals of f over the panels [a[i], b[i]]."""
    x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = mid[:, None] + half[:, None] * x[None, :]
    return np.sum(f(nodes) * w[None, :], axis=1) * half


def coherent_amplitude(spec, t, tol=1e-13, order=20, max_panels=2**16):
    """alpha(t) = -i/sqrt(2 m omega) int_0^t E(tau) exp(i omega (tau - t)) dtau.

    Composite Gauss-Legendre quadrature on panels of equal size; the panel
    count doubles until two refinements agree to ``tol`` (absolute, times
    max(1, |alpha|)).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    pulse = spec.pulse
    om = spec.omega

    def integrand(tau):
        return pulse.field(tau) * np.exp(1j * om * tau)

    t_hi = max(float(t.max()), 0.0)
    prev = None
    n = 64
    while n <= max_panels:
        edges = np.linspace(0.0, t_hi, n + 1) if t_hi > 0 else np.array([0.0, 0.0])
        # integrate up to each requested time: full panels plus the partial last one
        panel = _gauss_legendre_cumulative(integrand, edges, order)
        cum = np.concatenate([[0.0], np.cumsum(panel)])
        idx = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, n)
        # partial panels [edges[idx], t], all at once
        rest = _gauss_legendre_panels(integrand, edges[idx], t, order)
        vals = cum[idx] + rest
        if prev is not None and np.max(np.abs(vals - prev)) <= tol * max(1.0, np.max(np.abs(vals))):
            return -1j / sqrt(2.0 * spec.mass * om) * vals * np.exp(-1j * om * t)
        prev = vals
        n *= 2
    raise QuadratureError("coherent amplitude quadrature did not converge")


def coherent_amplitude_closed(spec, t):
    """Closed form of the same integral (sin^2 envelope times cosine carrier)."""
    t = np.asarray(t, dtype=float)
    w, w0, T, e0 = spec.omega, spec.omega0, spec.T, spec.e0
    wp = 2.0 * np.pi / T
    # S cos(w0 tau) e^{i w tau} = sum of c_a exp(i nu_a tau)
    terms = []
    for sgn in (1.0, -1.0):
        for nu, c in ((0.0, 0.5), (wp, -0.25), (-wp, -0.25)):
            terms.append((w + sgn * w0 + nu, 0.5 * c))
    total = np.zeros(t.shape, dtype=complex)
    for nu, c in terms:
        if abs(nu) < 1e-300:
            total += c * t
        else:
            total += c * (np.exp(1j * nu * t) - 1.0) / (1j * nu)
    total *= e0
    return -1j / sqrt(2.0 * spec.mass * w) * total * np.exp(-1j * w * t)


def oscillator_oracle(spec, t, **kw):
    """Ground-state population exp(-|alpha(t)|^2)."""
    return np.exp(-np.abs(coherent_amplitude(spec, t, **kw)) ** 2)


def oscillator_position(spec, t):
    """<r>(t) = sqrt(2/(m omega)) Re alpha(t)."""
    return sqrt(2.0 / (spec.mass * spec.omega)) * np.real(coherent_amplitude(spec, t))


def depletion_amplitude(spec, target=1e-4, n_samples=2001):
    """Amplitude e0 for which the minimum over [0, T] of the ground-state population equals ``target``.

    |alpha| is linear in e0, so the minimum population scales as
    exp(-e0^2 max|alpha_1|^2) with alpha_1 the amplitude for unit e0.
    """
    unit = DrivenOscillatorSpec(**{**spec.__dict__, "e0": 1.0})
    t = np.linspace(0.0, spec.T, n_samples)
    amax = np.max(np.abs(coherent_amplitude(unit, t)))

    # refine the location of the maximum on a fine local grid
    i = int(np.argmax(np.abs(coherent_amplitude(unit, t))))
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, len(t) - 1)]
    fine = np.linspace(lo, hi, 201)
    amax = max(amax, float(np.max(np.abs(coherent_amplitude(unit, fine)))))
    return sqrt(-np.log(target)) / amax


def grid_ground_state(model, tol=1e-10, tau=None, max_iter=200):
    """Lowest eigenstate of H0 by imaginary-time Chebychev relaxation.

    Repeatedly applies exp(-H0 tau) (Chebychev series of the real exponential)
    and renormalises until the residual ||H0 psi - <H0> psi|| drops below tol.
    """
    lo, hi = model.spectral_range(0.0)
    center, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    tau = 4.0 / half * 10 if tau is None else tau
    series = scalar_func_series(lambda x: np.exp(-(x - lo) * tau), center, half, 1e-16)
    if isinstance(model, TwoSurfaceModel):
        r = np.concatenate([model.grid.r, model.grid.r])
        w = np.concatenate([np.ones(model.n), np.zeros(model.n)])
    else:
        r = model.grid.r
        w = np.ones(model.dim)
    psi = (w * np.exp(-0.5 * (r - r[np.argmin(model.potential)]) ** 2)).astype(complex)
    psi /= np.linalg.norm(psi)
    apply_h0 = model.apply_h0
    for _ in range(max_iter):
        psi = apply_operator_series(series.coeffs, apply_h0, center, half, psi)
        psi /= np.linalg.norm(psi)
        hpsi = apply_h0(psi)
        e = np.vdot(psi, hpsi).real
        res = np.linalg.norm(hpsi - e * psi)
        if res < tol:
            return psi, e, res
    raise QuadratureError(f"relaxation stalled at residual {res:.3g}")


# -- wave-packet interferometry ---------------------------------------------------
@dataclass(frozen=True)
class WpiSpec:
    """Ground V_g = m w_g^2 r^2/2 and excited V_e = m w_e^2 (r - r_e)^2/2, coupled by mu E(t).

    Pump: sin^2 envelope of length ``duration`` at t=0, carrier ``carrier``
    (default: vertical transition energy at the ground minimum) with its
    phase referenced to the pulse centre. Control: the same pulse delayed by
    ``delay`` with the extra carrier phase ``phi``. The pulse area
    A = mu e0 duration / 2 fixes e0.
    """

    phi: float = 0.0
    area: float = np.pi / 2
    control_area: float = None
    duration: float = 0.3
    delay: float = 2.0 * np.pi
    r_e: float = 3.5
    omega_g: float = 1.0
    omega_e: float = 1.0
    mass: float = 1.0
    mu: float = 1.0
    carrier: float = None
    n_grid: int = 128
    r_min: float = -10.0
    r_max: float = 12.0

    @property
    def grid(self):
        return FourierGrid(self.n_grid, self.r_min, self.r_max)

    @property
    def omega0(self):
        if self.carrier is not None:
            return self.carrier
        return 0.5 * self.mass * self.omega_e**2 * self.r_e**2

    def amplitude(self, area):
        return 2.0 * area / (self.mu * self.duration)

    @property
    def pulses(self):
        w0, tau = self.omega0, self.duration
        c_area = self.area if self.control_area is None else self.control_area
        pump = Pulse(self.amplitude(self.area), tau, 0.0, w0, -w0 * 0.5 * tau)
        t_c = self.delay + 0.5 * tau
        control = Pulse(self.amplitude(c_area), tau, self.delay, w0, -w0 * t_c + self.phi)
        return pump, control

    @property
    def t_pump_end(self):
        return self.duration

    @property
    def t_final(self):
        return self.delay + self.duration


def build_wpi(spec=WpiSpec()):
    g = spec.grid
    vg = 0.5 * spec.mass * spec.omega_g**2 * g.r**2
    ve = 0.5 * spec.mass * spec.omega_e**2 * (g.r - spec.r_e) ** 2
    return TwoSurfaceModel(g, vg, ve, dipole=spec.mu, mass=spec.mass, pulses=spec.pulses)


def wpi_initial_state(model, tol=1e-10):
    psi, _, _ = grid_ground_state(model, tol=tol)
    return psi


def wpi_ratio(pop_end, pop_t1):
    """R = (P_e(T) / P_e(t1))^2."""
    if pop_t1 == 0.0:
        raise ZeroDivisionError("pump produced no excited population")
    return (pop_end / pop_t1) ** 2


# -- error measures ---------------------------------------------------------------
@dataclass
class ErrorMetrics:
    times: np.ndarray
    eps_sol: np.ndarray
    eps_norm: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def eps_sol_max(self):
        return float(np.max(self.eps_sol)) if len(self.eps_sol) else 0.0

    @property
    def eps_norm_max(self):
        return float(np.max(self.eps_norm)) if len(self.eps_norm) else 0.0


def error_metrics(times, populations, reference, norms_sq, diagnostics=None):
    """eps_sol(t) = |P_ref(t) - P(t)| and eps_norm(t) = |1 - <psi|psi>|."""
    populations = np.asarray(populations, dtype=float)
    reference = np.asarray(reference, dtype=float)
    norms_sq = np.asarray(norms_sq, dtype=float)
    if not (populations.shape == reference.shape == norms_sq.shape == np.shape(times)):
        raise DimensionError("traces must be sampled at identical times")
    return ErrorMetrics(np.asarray(times), np.abs(reference - populations),
                        np.abs(1.0 - norms_sq), dict(diagnostics or {}))


def relative_error(r_ref, r):
    """|R_ref - R| / R_ref."""
    return abs(r_ref - r) / abs(r_ref)
