"""
Time steppers for i d/dt psi = H(t) psi.

* standard Chebychev step: exp(-i H_n dt) with H frozen at the interval midpoint
* inhomogeneous Chebychev step: polynomial part from the lambda recursion plus
  F_m(H_n) applied to lambda^(m)
* iteratively time-ordered (ITO) step built from the two above
* RK4 and Strang split-operator baselines
"""
from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial, ceil
import time

import numpy as np
import scipy.fft as sfft
from numba import njit

from .chebyshev import (
    LocalTimeGrid,
    apply_operator_series,
    cheb_to_taylor,
    exp_series_bessel,
    fm_values,
    samples_to_cheb,
    scalar_func_series,
    truncate,
)
from .errors import (
    InsufficientSamplesError,
    IterationError,
    OrderLimitError,
    PropagationError,
)
from .lincore import GridModel, TwoSurfaceModel

MAX_SAMPLES = 128


@dataclass(frozen=True)
class ItoConfig:
    dt: float
    n_t: int = 8
    eps: float = 1e-12
    k_cap: int = 25
    m_cap: int = 60
    n_cheby_cap: int = 1024
    strict: bool = False
    # truncation level of the operator-function series (floored at 4 machine eps)
    series_eps: float = 1e-16

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.n_t < 2:
            raise ValueError("n_t must be >= 2")
        if not self.dt > 0:
            raise ValueError("dt must be positive")


@dataclass
class StepDiagnostics:
    m_k: int = 0
    n_cheby: int = 0
    k_used: int = 0
    n_t_used: int = 0
    residual: float = 0.0
    # set when N_t is much larger than needed (shrinking is left to the caller)
    shrink_advisory: bool = False


# -- cached scalar series ------------------------------------------------------
@lru_cache(maxsize=8192)
def exp_series(dtau, center, half_width, eps, n_max=1024):
    """Chebychev coefficients of exp(-i x dtau) over the spectral interval."""
    s = exp_series_bessel(dtau, center, half_width, max(eps, 1e-17), n_max=n_max)
    s.coeffs.setflags(write=False)
    return s


@lru_cache(maxsize=8192)
def fm_series(m, s, center, half_width, eps, n_max=1024):
    """Chebychev coefficients of x -> F_m(x; s)."""
    out = scalar_func_series(lambda x: fm_values(x, s, m), center, half_width, eps,
                             n_max=n_max, n_start=_start_size(half_width * abs(s)))
    out.coeffs.setflags(write=False)
    return out


def _start_size(arg):
    n = 16
    while n < 1.5 * arg + 16:
        n *= 2
    return n


# -- standard Chebychev --------------------------------------------------------
def standard_cheb_step(model, psi, t_n, dtau, eps, n_cheby_cap=1024, freeze="midpoint"):
    """exp(-i H_f dtau) psi with H_f = H0 + E(t_f) mu frozen over the step.

    ``freeze`` picks t_f: "midpoint" (t_n + dtau/2, second order in dtau) or
    "start" (t_n, first order).
    """
    if not dtau > 0:
        raise ValueError("dtau must be positive")
    if freeze == "midpoint":
        t_f = t_n + 0.5 * dtau
    elif freeze == "start":
        t_f = t_n
    else:
        raise ValueError(f"unknown freeze point {freeze!r}")
    w = float(model.field(t_f))
    lo, hi = model.spectral_bounds
    center, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    series = exp_series(float(dtau), center, half, eps, n_cheby_cap)
    return apply_operator_series(series.coeffs, lambda v: model.apply_frozen(w, v),
                                 center, half, psi)


# -- inhomogeneous Chebychev ---------------------------------------------------
def lambda_recursion(apply_hn, psi_n, taylor):
    """lambda^(0) = psi_n, lambda^(j) = -i H_n lambda^(j-1) + Phi^(j-1), j = 1..m."""
    m = taylor.shape[0]
    lam = np.empty((m + 1,) + psi_n.shape, dtype=complex)
    lam[0] = psi_n
    for j in range(1, m + 1):
        lam[j] = -1j * apply_hn(lam[j - 1]) + taylor[j - 1]
    return lam


def inhomo_solution(apply_hn, bounds, psi_n, taylor, offsets, eps, n_cheby_cap=1024):
    """Solution of d/dt psi = -i H_n psi + sum_j (t - t_n)^j / j! Phi^(j) at t_n + s.

    Returns (states with shape (len(offsets),) + psi.shape, longest F_m series).
    """
    taylor = np.asarray(taylor)
    m = taylor.shape[0]
    offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
    lo, hi = bounds
    center, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    lam = lambda_recursion(apply_hn, psi_n, taylor)
    series = [fm_series(m, float(s), center, half, eps, n_cheby_cap) for s in offsets]
    n_cheby = max(len(sr) for sr in series)
    cmat = np.zeros((len(offsets), n_cheby), dtype=complex)
    for i, sr in enumerate(series):
        cmat[i, :len(sr)] = sr.coeffs
    out = apply_operator_series(cmat, apply_hn, center, half, lam[m])
    weights = np.array([[s**j / factorial(j) for j in range(m)] for s in offsets])
    out += np.tensordot(weights, lam[:m], axes=(1, 0))
    return out, n_cheby


def inhomo_step(model, w_n, psi_n, taylor, dt, eps, n_cheby_cap=1024):
    """One inhomogeneous step over [t_n, t_n + dt] with H_n = H0 + w_n mu."""
    out, _ = inhomo_solution(lambda v: model.apply_frozen(w_n, v), model.spectral_bounds,
                             psi_n, taylor, [dt], eps, n_cheby_cap)
    return out[0]


# -- iterative time ordering ---------------------------------------------------
def _homogeneous_samples(model, w, psi, offsets, dt, eps, cap):
    """psi_0 = exp(-i H_n s) psi at every offset s and at dt.

    All exponentials share one Chebychev recurrence started from psi, which
    equals stepping sub-interval by sub-interval up to rounding.
    """
    lo, hi = model.spectral_bounds
    center, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    marks = np.concatenate([offsets, [dt]])
    series = [exp_series(float(s), center, half, eps, cap) for s in marks]
    n = max(len(sr) for sr in series)
    cmat = np.zeros((len(marks), n), dtype=complex)
    for i, sr in enumerate(series):
        cmat[i, :len(sr)] = sr.coeffs
    return apply_operator_series(cmat, lambda v: model.apply_frozen(w, v), center, half, psi)


def ito_step(model, psi, t_n, config, n_t=None):
    """Advance psi from t_n to t_n + dt with iterative time ordering.

    Returns (psi(t_n + dt), StepDiagnostics). N_t doubles (up to 128) whenever the
    inhomogeneity needs more Chebychev terms than there are samples.
    """
    psi = model.check(np.asarray(psi, dtype=complex))
    n_t = config.n_t if n_t is None else n_t
    while True:
        try:
            return _ito_attempt(model, psi, t_n, config, n_t)
        except InsufficientSamplesError:
            if 2 * n_t > MAX_SAMPLES:
                raise
            n_t *= 2


def _ito_attempt(model, psi, t_n, config, n_t):
    dt, eps = config.dt, config.eps
    grid = LocalTimeGrid(t_n, dt, n_t)
    offsets = grid.offsets
    t_mid = t_n + 0.5 * dt
    w = float(model.field(t_mid))
    apply_hn = lambda v: model.apply_frozen(w, v)  # noqa: E731
    dfield = np.asarray(model.field_difference(grid.tau, t_mid), dtype=float)
    s_eps = config.series_eps

    states = _homogeneous_samples(model, w, psi, offsets, dt, s_eps, config.n_cheby_cap)
    diag = StepDiagnostics(m_k=0, n_cheby=0, k_used=1, n_t_used=n_t)
    if not np.any(dfield):
        # zero inhomogeneity: psi_1 == psi_0
        return states[-1], diag

    marks = np.concatenate([offsets, [dt]])
    # c_j moves psi(t_n + dt) by at most dt |c_j|: below this it is rounding noise
    floor = np.finfo(float).eps * float(np.linalg.norm(psi)) / dt
    mu_psi_dim = psi.shape
    for k in range(1, config.k_cap + 1):
        samples = states[:-1]
        phi = -1j * dfield.reshape((-1,) + (1,) * len(mu_psi_dim)) * model.apply_mu(samples)
        cheb = samples_to_cheb(phi)
        m = truncate(cheb, eps, floor=floor)
        if m > config.m_cap:
            raise OrderLimitError(f"inhomogeneity needs order {m} > m_cap {config.m_cap}")
        taylor = cheb_to_taylor(cheb.coeffs, m, dt)
        new, n_cheby = inhomo_solution(apply_hn, model.spectral_bounds, psi, taylor, marks,
                                       s_eps, config.n_cheby_cap)
        diag.m_k = max(diag.m_k, m)
        diag.n_cheby = max(diag.n_cheby, n_cheby)
        diff = new - states
        resid = float(np.linalg.norm(diff[-1]))
        if config.strict:
            resid = max(resid, float(np.max(np.linalg.norm(diff.reshape(len(marks), -1), axis=1))))
        states = new
        diag.k_used = k
        diag.residual = resid
        if resid < eps:
            diag.shrink_advisory = n_t >= 2 * diag.m_k + 2
            return states[-1], diag
    raise IterationError(
        f"time ordering did not converge in {config.k_cap} iterations (residual {resid:.3g})",
        residual=resid,
    )


# -- baselines -----------------------------------------------------------------
def rk4_step(model, psi, t, dt):
    """Classical RK4 for d/dt psi = -i H(t) psi."""
    f = lambda tt, v: -1j * model.apply_h_at(tt, v)  # noqa: E731
    k1 = f(t, psi)
    k2 = f(t + 0.5 * dt, psi + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, psi + 0.5 * dt * k2)
    k4 = f(t + dt, psi + dt * k3)
    return psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@lru_cache(maxsize=64)
def _kinetic_phase(tk_bytes, dt):
    tk = np.frombuffer(tk_bytes)
    return np.exp(-1j * tk * dt)


def split_step(model, psi, t, dt):
    """Strang splitting exp(-i V dt/2) exp(-i T dt) exp(-i V dt/2), field at t + dt/2."""
    if not isinstance(model, GridModel | TwoSurfaceModel):
        raise TypeError(f"split-operator needs a grid representation, got {type(model).__name__}")
    w = float(model.field(t + 0.5 * dt))
    kphase = _kinetic_phase(model.tk.tobytes(), float(dt))
    if isinstance(model, TwoSurfaceModel):
        half = _two_surface_potential_propagator(model, w, 0.5 * dt)
        s = model.surfaces(psi)
        s = _apply_block(half, s)
        s = sfft.ifft(kphase * sfft.fft(s, axis=-1), axis=-1)
        s = _apply_block(half, s)
        return s.reshape(psi.shape)
    else:
        vphase = np.exp(-0.5j * dt * (model.potential + w * model.dipole))
        out = vphase * psi
        out = sfft.ifft(kphase * sfft.fft(out))
        return vphase * out


def _two_surface_potential_propagator(model, w, tau):
    """exp(-i M tau) for M = [[V_g, mu w], [mu w, V_e]] at every grid point; shape (2, 2, N)."""
    a, b = model.v_ground, model.v_excited
    c = w * model.dipole
    mean = 0.5 * (a + b)
    d = 0.5 * (a - b)
    omega = np.hypot(d, c)
    cos = np.cos(omega * tau)
    # sin(omega tau)/omega, finite at omega = 0
    sinc = tau * np.sinc(omega * tau / np.pi)
    phase = np.exp(-1j * mean * tau)
    u = np.empty((2, 2) + a.shape, dtype=complex)
    u[0, 0] = phase * (cos - 1j * sinc * d)
    u[1, 1] = phase * (cos + 1j * sinc * d)
    u[0, 1] = u[1, 0] = phase * (-1j * sinc * c)
    return u


def _apply_block(u, s):
    out = np.empty_like(s, dtype=complex)
    out[..., 0, :] = u[0, 0] * s[..., 0, :] + u[0, 1] * s[..., 1, :]
    out[..., 1, :] = u[1, 0] * s[..., 0, :] + u[1, 1] * s[..., 1, :]
    return out


# -- steppers and propagation loop -----------------------------------------------
class Stepper:
    """Callable interface: step(model, psi, t, dt) -> (psi, diagnostics or None)."""

    name = "abstract"

    def step(self, model, psi, t, dt):
        raise NotImplementedError


class ChebStepper(Stepper):
    """Standard Chebychev propagation without time ordering."""

    name = "cheb"

    def __init__(self, eps=1e-16, n_cheby_cap=1024, freeze="start"):
        self.eps = eps
        self.n_cheby_cap = n_cheby_cap
        self.freeze = freeze

    def step(self, model, psi, t, dt):
        lo, hi = model.spectral_bounds
        series = exp_series(float(dt), 0.5 * (hi + lo), 0.5 * (hi - lo), self.eps, self.n_cheby_cap)
        out = standard_cheb_step(model, psi, t, dt, self.eps, self.n_cheby_cap, self.freeze)
        return out, StepDiagnostics(n_cheby=len(series), k_used=0)


class ItoStepper(Stepper):
    """ITO stepper; keeps the N_t reached so far (never shrinks within a run)."""

    name = "ito"

    def __init__(self, eps=1e-12, n_t=8, k_cap=25, m_cap=60, n_cheby_cap=1024, strict=False,
                 series_eps=1e-16):
        self.eps = eps
        self.series_eps = series_eps
        self.n_t = n_t
        self.k_cap = k_cap
        self.m_cap = m_cap
        self.n_cheby_cap = n_cheby_cap
        self.strict = strict

    def config(self, dt):
        return ItoConfig(dt=dt, n_t=self.n_t, eps=self.eps, k_cap=self.k_cap, m_cap=self.m_cap,
                         n_cheby_cap=self.n_cheby_cap, strict=self.strict,
                         series_eps=self.series_eps)

    def step(self, model, psi, t, dt):
        out, diag = ito_step(model, psi, t, self.config(dt))
        self.n_t = max(self.n_t, diag.n_t_used)
        return out, diag


class RK4Stepper(Stepper):
    name = "rk4"

    def step(self, model, psi, t, dt):
        return rk4_step(model, psi, t, dt), None


class SplitStepper(Stepper):
    name = "split"

    def step(self, model, psi, t, dt):
        return split_step(model, psi, t, dt), None


def make_stepper(method, eps=1e-12, n_t=8, **kw):
    method = method.lower()
    if method == "ito":
        return ItoStepper(eps=eps, n_t=n_t, **kw)
    if method == "cheb":
        return ChebStepper(**kw)
    if method == "rk4":
        return RK4Stepper()
    if method == "split":
        return SplitStepper()
    raise ValueError(f"unknown method {method!r}")


@dataclass
class Trajectory:
    times: np.ndarray
    records: list
    final: np.ndarray
    diagnostics: list = field(default_factory=list)
    wall_seconds: float = 0.0

    def summary(self):
        d = [x for x in self.diagnostics if x is not None]
        return {
            "m_k": max((x.m_k for x in d), default=0),
            "n_cheby": max((x.n_cheby for x in d), default=0),
            "k_max": max((x.k_used for x in d), default=0),
            "n_t": max((x.n_t_used for x in d), default=0),
        }


def step_times(t0, total, dt):
    """Boundaries t0, t0 + dt, ..., t0 + total (last interval shortened if needed)."""
    n = max(1, ceil(total / dt - 1e-9))
    times = t0 + dt * np.arange(n + 1)
    times[-1] = t0 + total
    return times


def propagate(model, psi0, total, stepper, dt, t0=0.0, observe=None, record_every=1):
    """Apply ``stepper`` over [t0, t0 + total] in steps of dt.

    ``observe(t, psi)`` is evaluated at t0 and after every ``record_every``
    steps (and always at the final time).
    """
    psi = model.check(np.asarray(psi0, dtype=complex)).copy()
    times = step_times(t0, total, dt)
    rec_t, records, diags = [], [], []
    if observe is not None:
        rec_t.append(times[0])
        records.append(observe(times[0], psi))
    start = time.perf_counter()
    n_steps = len(times) - 1
    for i in range(n_steps):
        h = times[i + 1] - times[i]
        try:
            psi, diag = stepper.step(model, psi, times[i], h)
        except PropagationError as exc:
            exc.time = times[i]
            raise
        diags.append(diag)
        if observe is not None and ((i + 1) % record_every == 0 or i + 1 == n_steps):
            rec_t.append(times[i + 1])
            records.append(observe(times[i + 1], psi))
    wall = time.perf_counter() - start
    return Trajectory(np.array(rec_t), records, psi, diags, wall)


# -- compiled RK4 driver -------------------------------------------------------------
@njit(cache=True)
def _rk4_chunk(h0, x, v, fields, dt):
    """RK4 steps for a real symmetric H0 + E x on v = [Re psi, Im psi] (shape (n, 2)).

    fields[2k], fields[2k+1], fields[2k+2] hold E at t_k, t_k + dt/2, t_k + dt.
    """
    n = v.shape[0]
    hv = np.empty((n, 2))
    k1 = np.empty((n, 2))
    k2 = np.empty((n, 2))
    k3 = np.empty((n, 2))
    k4 = np.empty((n, 2))
    tmp = np.empty((n, 2))
    n_steps = (fields.shape[0] - 1) // 2
    for s in range(n_steps):
        for stage in range(4):
            if stage == 0:
                src, e, dst = v, fields[2 * s], k1
            elif stage == 1:
                for i in range(n):
                    tmp[i, 0] = v[i, 0] + 0.5 * dt * k1[i, 0]
                    tmp[i, 1] = v[i, 1] + 0.5 * dt * k1[i, 1]
                src, e, dst = tmp, fields[2 * s + 1], k2
            elif stage == 2:
                for i in range(n):
                    tmp[i, 0] = v[i, 0] + 0.5 * dt * k2[i, 0]
                    tmp[i, 1] = v[i, 1] + 0.5 * dt * k2[i, 1]
                src, e, dst = tmp, fields[2 * s + 1], k3
            else:
                for i in range(n):
                    tmp[i, 0] = v[i, 0] + dt * k3[i, 0]
                    tmp[i, 1] = v[i, 1] + dt * k3[i, 1]
                src, e, dst = tmp, fields[2 * s + 2], k4
            np.dot(h0, src, hv)
            # -i H (a + i b) = H b - i H a
            for i in range(n):
                dst[i, 0] = hv[i, 1] + e * x[i] * src[i, 1]
                dst[i, 1] = -(hv[i, 0] + e * x[i] * src[i, 0])
        c = dt / 6.0
        for i in range(n):
            v[i, 0] += c * (k1[i, 0] + 2.0 * k2[i, 0] + 2.0 * k3[i, 0] + k4[i, 0])
            v[i, 1] += c * (k1[i, 1] + 2.0 * k2[i, 1] + 2.0 * k3[i, 1] + k4[i, 1])
    return v


def rk4_propagate(model, psi0, total, dt, t0=0.0, observe=None, record_every=1, chunk=100000):
    """RK4 over [t0, t0 + total] like ``propagate(..., RK4Stepper(), ...)``.

    Grid models (real dense H0, diagonal dipole) run in a compiled loop on
    [Re psi, Im psi]; other models fall back to the generic driver.
    """
    if not isinstance(model, GridModel) or isinstance(model, TwoSurfaceModel):
        return propagate(model, psi0, total, RK4Stepper(), dt, t0, observe, record_every)
    psi = model.check(np.asarray(psi0, dtype=complex))
    h0 = np.ascontiguousarray(model.dense_h0(), dtype=float)
    x = np.ascontiguousarray(model.dipole, dtype=float)
    v = np.ascontiguousarray(np.stack([psi.real, psi.imag], axis=1))
    times = step_times(t0, total, dt)
    n_steps = len(times) - 1
    # a shortened last interval is done by the generic step
    n_uniform = n_steps if np.isclose(times[-1] - times[-2], dt, rtol=1e-12, atol=0) else n_steps - 1
    rec_t, records = [], []
    if observe is not None:
        rec_t.append(times[0])
        records.append(observe(times[0], psi))
    block = max(1, min(record_every, chunk)) if observe is not None else chunk
    start = time.perf_counter()
    i = 0
    while i < n_uniform:
        c = min(block, n_uniform - i)
        tt = np.empty(2 * c + 1)
        tt[0::2] = times[i:i + c + 1]
        tt[1::2] = times[i:i + c] + 0.5 * dt
        v = _rk4_chunk(h0, x, v, np.asarray(model.field(tt), dtype=float), float(dt))
        i += c
        if observe is not None and (i % record_every == 0 or i == n_steps):
            rec_t.append(times[i])
            records.append(observe(times[i], v[:, 0] + 1j * v[:, 1]))
    psi = v[:, 0] + 1j * v[:, 1]
    if n_uniform < n_steps:
        psi = rk4_step(model, psi, times[-2], times[-1] - times[-2])
        if observe is not None:
            rec_t.append(times[-1])
            records.append(observe(times[-1], psi))
    wall = time.perf_counter() - start
    return Trajectory(np.array(rec_t), records, psi, [None] * n_steps, wall)
