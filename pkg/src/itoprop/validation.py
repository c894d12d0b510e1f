"""
Self-check suite: the numerical invariants of every module, each reported as
(name, value, tolerance, passed). Used by ``prop validate``.
"""
from dataclasses import dataclass, asdict
from fractions import Fraction
from math import factorial

import numpy as np
from scipy.linalg import expm

from .chebyshev import (
    cheb_to_taylor,
    chebyshev_roots,
    monomial_table,
    samples_to_cheb,
    taylor_eval,
)
from .lincore import LevelModel
from .models import DrivenOscillatorSpec, build_oscillator, build_two_level, oscillator_ground_state
from .propagators import (
    ItoConfig,
    ItoStepper,
    inhomo_step,
    ito_step,
    make_stepper,
    propagate,
    standard_cheb_step,
)

FAULTS = ("table",)


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""

    def as_dict(self):
        return asdict(self)


def _check(name, value, tol, detail="", upper=True):
    value = float(value)
    ok = bool(value <= tol) if upper else bool(value >= tol)
    return Check(name, value, tol, ok, detail)


def _table(m, fault):
    table = monomial_table(m, exact=True)
    if fault == "table":
        table = table.copy()
        table[m // 2, 1] += 1
    return table


def check_table_row_sums(fault=None, m=30):
    # P_j(1) = 1 for every row, and the leading entry is 2^(j-1) j!
    table = _table(m, fault)
    worst = 0.0
    for j in range(m):
        s = sum(Fraction(int(table[j, k]), factorial(k)) for k in range(j + 1))
        worst = max(worst, abs(float(s - 1)))
        if j >= 1:
            worst = max(worst, abs(float(table[j, j] - 2 ** (j - 1) * factorial(j))))
    return _check("monomial_table_row_sums", worst, 0.0, f"m={m}")


def check_quadrature(rng, trials=40):
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 41))
        c = rng.uniform(-1, 1, n)
        samples = np.polynomial.chebyshev.chebval(chebyshev_roots(n), c)
        worst = max(worst, float(np.max(np.abs(samples_to_cheb(samples).coeffs - c))))
    return _check("quadrature_exactness", worst, 1e-13, f"{trials} random polynomials, n<=40")


def check_round_trip(rng, fault=None, orders=(10, 20, 30)):
    worst = 0.0
    for m in orders:
        dt = 2.5
        c = rng.standard_normal((m, 4)) * (10.0 ** (-0.6 * np.arange(m)))[:, None]
        tay = cheb_to_taylor(c, m, dt, table=_table(m, fault).astype(float))
        tau = 0.5 * dt * (chebyshev_roots(m) + 1)
        back = samples_to_cheb(taylor_eval(tay, tau)).coeffs
        worst = max(worst, float(np.max(np.abs(back - c)) / np.max(np.abs(c))))
    return _check("cheb_to_taylor_round_trip", worst, 1e-10, f"m in {list(orders)}")


def _random_hermitian(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (a + a.conj().T)


def _random_state(rng, n):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def check_zero_inhomogeneity(rng):
    model = LevelModel(_random_hermitian(rng, 8), _random_hermitian(rng, 8))
    psi = _random_state(rng, 8)
    out, _ = ito_step(model, psi, 1.0, ItoConfig(dt=0.9, n_t=6))
    want = standard_cheb_step(model, psi, 1.0, 0.9, 1e-16)
    return _check("zero_inhomogeneity_equivalence", np.max(np.abs(out - want)), 1e-13)


def check_f1_closed_form(rng):
    h = _random_hermitian(rng, 5) + 3.0 * np.eye(5)
    model = LevelModel(h, np.zeros((5, 5)))
    psi, phi = _random_state(rng, 5), _random_state(rng, 5)
    worst = 0.0
    for dt in (0.05, 0.7, 3.0):
        u = expm(-1j * dt * h)
        want = u @ psi + np.linalg.solve(-1j * h, (u - np.eye(5)) @ phi)
        out = inhomo_step(model, 0.0, psi, phi[None, :], dt, 1e-16)
        worst = max(worst, float(np.max(np.abs(out - want))))
    return _check("f1_closed_form", worst, 1e-12)


def _small_oscillator(e0=0.8):
    spec = DrivenOscillatorSpec(omega0=1.0, e0=e0, n_grid=64, T=100.0)
    return spec, build_oscillator(spec)


def check_norm(eps=1e-10):
    spec, model = _small_oscillator()
    psi = oscillator_ground_state(spec)
    stepper = ItoStepper(eps=eps, n_t=10)
    worst = 0.0
    for t in np.arange(20.0, 22.0, 0.1):
        new, _ = stepper.step(model, psi, t, 0.1)
        worst = max(worst, abs(np.vdot(new, new).real - np.vdot(psi, psi).real))
        psi = new
    return _check("norm_per_step", worst / eps, 10.0, f"|d<psi|psi>| / eps, eps={eps:g}")


def check_sample_doubling(eps=1e-10):
    model = build_two_level()
    psi = np.array([0.8, 0.6j])
    worst = 0.0
    for dt in (10.0, 100.0, 700.0):
        a, _ = ito_step(model, psi, 3000.0, ItoConfig(dt=dt, n_t=12, eps=eps))
        b, _ = ito_step(model, psi, 3000.0, ItoConfig(dt=dt, n_t=24, eps=eps))
        worst = max(worst, float(np.linalg.norm(a - b)))
    return _check("n_t_doubling", worst / eps, 10.0, f"||psi(N) - psi(2N)|| / eps, eps={eps:g}")


def convergence_slope(method, dts, total=2.0):
    """log-log slope of the final-state error against an ITO reference on the driven oscillator."""
    spec, model = _small_oscillator(e0=0.5)
    psi0 = oscillator_ground_state(spec)
    ref = propagate(model, psi0, total, ItoStepper(eps=1e-13, n_t=12), 0.05).final
    errs = [np.linalg.norm(propagate(model, psi0, total, make_stepper(method), dt).final - ref)
            for dt in dts]
    return float(np.polyfit(np.log(dts), np.log(errs), 1)[0])


def check_slope(method, order, dts):
    slope = convergence_slope(method, dts)
    return _check(f"{method}_order", abs(slope - order), 0.3, f"slope {slope:.3f}, expected {order}")


def run_all(seed=0, fault=None):
    """Run every check; ``fault`` injects a known defect as a negative control."""
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; choose from {FAULTS}")
    rng = np.random.default_rng(seed)
    return [
        check_quadrature(rng),
        check_table_row_sums(fault),
        check_round_trip(rng, fault),
        check_zero_inhomogeneity(rng),
        check_f1_closed_form(rng),
        check_norm(),
        check_sample_doubling(),
        check_slope("rk4", 4.0, [0.02, 0.01, 0.005]),
        check_slope("split", 2.0, [0.02, 0.01, 0.005]),
    ]
