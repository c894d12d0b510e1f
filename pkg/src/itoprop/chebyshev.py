"""
Chebychev machinery: root grids, the sampling-to-coefficient cosine
transform, coefficient-ratio truncation, the conversion of Chebychev
coefficients to scaled Taylor coefficients, scalar function expansions and
their action as operator functions on states.
"""
from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.special import jv

from .errors import (
    BoundsViolationError,
    InsufficientSamplesError,
    OrderLimitError,
    SeriesConvergenceError,
)

# beyond this order the Chebychev -> Taylor back-substitution loses all digits
MAX_TAYLOR_ORDER = 60
# recurrence vectors growing beyond this factor signal a spectrum outside the bounds
DIVERGENCE_FACTOR = 1e3
_ZERO = 1e-300


def chebyshev_roots(n):
    """Roots of P_n, cos(pi (i + 1/2) / n), in ascending order."""
    if n < 1:
        raise ValueError(f"invalid order {n}")
    i = np.arange(n)
    # sin form is exactly antisymmetric and gives 0 exactly for odd n
    return np.sin(np.pi * (2 * i - n + 1) / (2 * n))


def chebyshev_matrix(n_terms, x):
    """P_j(x_i) for j < n_terms by the three-term recurrence; shape (n_terms, len(x))."""
    x = np.asarray(x, dtype=float)
    out = np.empty((n_terms, x.size))
    out[0] = 1.0
    if n_terms > 1:
        out[1] = x
    for j in range(2, n_terms):
        out[j] = 2.0 * x * out[j - 1] - out[j - 2]
    return out


def _root_cosines(n, n_terms):
    # P_j at the ascending roots, from exact angles theta_i = pi (n - i - 1/2) / n
    theta = np.pi * (n - np.arange(n) - 0.5) / n
    return np.cos(np.outer(np.arange(n_terms), theta))


@dataclass(frozen=True)
class LocalTimeGrid:
    """N_t sample times inside [t_n, t_n + dt] mapped from the roots of P_{N_t}."""

    t_n: float
    dt: float
    n_t: int

    @property
    def roots(self):
        return chebyshev_roots(self.n_t)

    @property
    def offsets(self):
        """tau_l - t_n."""
        return 0.5 * self.dt * (self.roots + 1.0)

    @property
    def tau(self):
        return self.t_n + self.offsets

    def scaled(self, t):
        return 2.0 * (np.asarray(t) - self.t_n) / self.dt - 1.0


@dataclass
class ChebyshevSeries:
    """Expansion coefficients c_0..c_{m-1} (scalars or vectors along axis 0) over
    the variable x = center + half_width * y, y in [-1, 1]."""

    coeffs: np.ndarray
    center: float = 0.0
    half_width: float = 1.0
    trunc_ratio: float = 0.0

    def __len__(self):
        return len(self.coeffs)

    @property
    def domain(self):
        return (self.center, self.half_width)

    def __call__(self, x):
        """Evaluate the (scalar) series at points x of the unscaled variable."""
        y = (np.asarray(x, dtype=float) - self.center) / self.half_width
        return np.polynomial.chebyshev.chebval(y, self.coeffs)


def samples_to_cheb(samples):
    """Chebychev coefficients from samples at the ascending roots of P_N.

    c_j = (2 - delta_j0)/N sum_i f(x_i) P_j(x_i), j = 0..N-1. Works on arrays of
    shape (N,) or (N, ...) (vector-valued samples).
    """
    samples = np.asarray(samples)
    n = samples.shape[0]
    if n == 0:
        raise ValueError("no samples")
    p = _root_cosines(n, n)
    flat = samples.reshape(n, -1)
    coeffs = (p @ flat) * (2.0 / n)
    coeffs[0] *= 0.5
    return ChebyshevSeries(coeffs.reshape(samples.shape))


def coefficient_norms(coeffs):
    coeffs = np.asarray(coeffs)
    return np.linalg.norm(coeffs.reshape(coeffs.shape[0], -1), axis=1)


def truncate(series, eps, reference="max", floor=0.0):
    """Expansion order m: the smallest m with ||c_m|| / ||c_ref|| < eps.

    ``reference="max"`` measures against the largest coefficient,
    ``reference="first"`` against c_0 (which can nearly vanish when the sampled
    function is close to odd on the interval). The index-m coefficient is the
    first omitted one. Raises InsufficientSamplesError when no m <= N-1
    qualifies (more samples needed). Coefficients with norm below the absolute
    ``floor`` also count as negligible.
    """
    coeffs = series.coeffs if isinstance(series, ChebyshevSeries) else np.asarray(series)
    norms = coefficient_norms(coeffs)
    n = len(norms)
    if reference == "max":
        ref = norms.max()
    elif reference == "first":
        ref = norms[0]
    else:
        raise ValueError(f"unknown reference {reference!r}")
    if np.all(norms < max(_ZERO, floor)):
        return 1
    if ref == 0.0:
        raise InsufficientSamplesError("leading coefficient vanishes", ratio=np.inf)
    ratios = norms / ref
    below = np.nonzero((ratios[1:] < eps) | (norms[1:] < floor))[0]
    if below.size == 0:
        raise InsufficientSamplesError(
            f"no truncation order below {n} reaches ratio {eps:g}", ratio=float(ratios[-1])
        )
    return int(below[0]) + 1


def monomial_table(m, exact=False):
    """C_{j,k}, 0 <= k <= j < m, with P_j(x) = sum_k C_{j,k} x^k / k!.

    Recursion C_{j+1,k} = 2k C_{j,k-1} - C_{j-1,k}. With ``exact=True`` the
    entries are Python integers (object array), otherwise float64.
    """
    if m < 1:
        raise ValueError("order must be >= 1")
    if m > MAX_TAYLOR_ORDER:
        raise OrderLimitError(f"order {m} exceeds {MAX_TAYLOR_ORDER}")
    table = [[0] * m for _ in range(m)]
    table[0][0] = 1
    if m > 1:
        table[1][1] = 1
    for j in range(1, m - 1):
        for k in range(j + 2):
            prev = 2 * k * table[j][k - 1] if k >= 1 else 0
            table[j + 1][k] = prev - table[j - 1][k]
    if exact:
        out = np.empty((m, m), dtype=object)
        for j in range(m):
            for k in range(m):
                out[j, k] = table[j][k]
        return out
    return np.array([[float(v) for v in row] for row in table])


def cheb_to_taylor(coeffs, m, dt, table=None):
    """Scaled Taylor coefficients Phi^(j) from Chebychev coefficients over [0, dt].

    Solves sum_j P_j(2 tau/dt - 1) c_j = sum_j tau^j / j! Phi^(j) by back
    substitution from the highest order. Returns an array of shape (m, ...).
    ``table`` overrides the monomial table (at least m x m).
    """
    coeffs = np.asarray(coeffs.coeffs if isinstance(coeffs, ChebyshevSeries) else coeffs)
    if m > len(coeffs):
        raise ValueError(f"order {m} exceeds series length {len(coeffs)}")
    if m > MAX_TAYLOR_ORDER:
        raise OrderLimitError(f"Chebychev->Taylor transform unstable at order {m}")
    c = monomial_table(m) if table is None else np.asarray(table, dtype=float)
    cbar = coeffs[:m]
    # s[j] = dt^j / 2^j
    s = (0.5 * dt) ** np.arange(m)
    taylor = np.zeros(cbar.shape, dtype=np.result_type(cbar, float))
    for k in range(m - 1, -1, -1):
        acc = np.tensordot(c[k:, k], cbar[k:], axes=(0, 0))
        for jp in range(k + 1, m):
            acc = acc - (s[jp] / factorial(jp - k)) * taylor[jp]
        taylor[k] = acc / s[k]
    return taylor


def taylor_eval(taylor, s):
    """sum_j s^j / j! Phi^(j) at offsets s (scalar or 1-D array)."""
    taylor = np.asarray(taylor)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    m = taylor.shape[0]
    w = np.array([[si**j / factorial(j) for j in range(m)] for si in s])
    return np.tensordot(w, taylor, axes=(1, 0))


def scalar_func_series(f, center, half_width, eps, n_max=1024, n_start=16):
    """Chebychev series of f(x) on [center - half_width, center + half_width].

    Coefficients come from the cosine transform of f sampled at Chebychev
    roots; N doubles until the series truncates at m <= N/2 (two consecutive
    coefficients below eps relative to max(|c_j|, |f(x_i)|)). The series
    length m is capped by n_max.
    """
    tol = max(eps, 4.0 * np.finfo(float).eps)
    n = max(4, n_start)
    ratio = np.inf
    while True:
        y = chebyshev_roots(n)
        vals = np.asarray(f(center + half_width * y))
        coeffs = samples_to_cheb(vals).coeffs
        mags = np.abs(coeffs)
        # the omitted tail bounds the error relative to max |f|
        big = max(mags.max(), float(np.max(np.abs(vals))))
        if big == 0.0:
            return ChebyshevSeries(coeffs[:1] * 0, center, half_width, 0.0)
        rel = mags / big
        small = (rel[:-1] < tol) & (rel[1:] < tol)
        hits = np.nonzero(small[1:])[0]
        if hits.size:
            m = int(hits[0]) + 1
            if m <= n // 2:
                if m > n_max:
                    break
                return ChebyshevSeries(coeffs[:m].copy(), center, half_width, float(rel[m]))
        ratio = float(rel[n // 2:].max())
        if n >= 2 * n_max:
            break
        n *= 2
    raise SeriesConvergenceError(
        f"series not converged within {n_max} terms (ratio {ratio:.3g})", ratio=ratio
    )


def apply_operator_series(coeffs, apply_h, center, half_width, psi):
    """sum_j c_j P_j(H_norm) psi with H_norm = (H - center) / half_width.

    ``coeffs`` is 1-D (one function) or 2-D (S functions sharing the
    recurrence, shape (S, m)); the result is psi-shaped or (S,) + psi.shape.
    """
    coeffs = np.asarray(coeffs)
    single = coeffs.ndim == 1
    cmat = coeffs[None, :] if single else coeffs
    n_terms = cmat.shape[1]
    psi = np.asarray(psi, dtype=complex)
    ref = np.linalg.norm(psi)
    limit = DIVERGENCE_FACTOR * max(ref, _ZERO)
    inv = 1.0 / half_width

    def h_norm(v):
        return (apply_h(v) - center * v) * inv

    out = np.multiply.outer(cmat[:, 0], psi)
    if n_terms > 1:
        prev, cur = psi, h_norm(psi)
        out += np.multiply.outer(cmat[:, 1], cur)
        for j in range(2, n_terms):
            nxt = 2.0 * h_norm(cur) - prev
            if j % 8 == 0 and np.linalg.norm(nxt) > limit:
                raise BoundsViolationError(f"Chebychev recurrence diverged at term {j}")
            out += np.multiply.outer(cmat[:, j], nxt)
            prev, cur = cur, nxt
    return out[0] if single else out


def exp_series_bessel(dtau, center, half_width, eps, n_max=1024):
    """Chebychev series of exp(-i x dtau) from Bessel functions.

    c_j = (2 - delta_j0) (-i)^j J_j(half_width dtau) exp(-i center dtau),
    truncated after two consecutive |c_j| < eps beyond the turning index.
    """
    alpha = half_width * dtau
    n = int(abs(alpha) + 20.0 + 5.0 * abs(alpha) ** (1.0 / 3.0))
    while True:
        j = np.arange(n)
        mags = jv(j, alpha)
        small = (np.abs(mags[:-1]) < eps) & (np.abs(mags[1:]) < eps) & (j[:-1] > abs(alpha))
        hits = np.nonzero(small)[0]
        if hits.size:
            m = max(int(hits[0]), 1)
            break
        if n > n_max:
            raise SeriesConvergenceError(
                f"exponential series needs more than {n_max} terms", ratio=float(abs(mags[-1]))
            )
        n *= 2
    if m > n_max:
        raise SeriesConvergenceError(f"exponential series needs {m} > {n_max} terms",
                                     ratio=float(abs(mags[n_max])))
    coeffs = 2.0 * (-1j) ** (j[:m] % 4) * mags[:m] * np.exp(-1j * center * dtau)
    coeffs[0] *= 0.5
    return ChebyshevSeries(coeffs, center, half_width, float(abs(mags[m])))


def exp_function(dtau):
    """x -> exp(-i x dtau)."""

    def f(x):
        return np.exp(-1j * x * dtau)

    return f


def fm_values(x, s, m):
    """F_m(x; s) = (-i x)^{-m} (exp(-i x s) - sum_{j<m} (-i x s)^j / j!).

    Uses the convergent Taylor tail sum_a (-i x)^a s^{a+m} / (a+m)! where the
    closed form cancels catastrophically, i.e. where |x s|^m is not well above m!.
    """
    x = np.asarray(x, dtype=float)
    z = -1j * x * s
    if m == 0:
        return np.exp(z)
    az = np.abs(z)
    switch = max(0.5, 1.5 * factorial(m) ** (1.0 / m))
    small = az < switch
    out = np.empty(x.shape, dtype=complex)
    big = ~small
    if np.any(big):
        zb = z[big]
        partial = np.zeros_like(zb)
        term = np.ones_like(zb)
        for j in range(m):
            partial += term
            term = term * zb / (j + 1)
        out[big] = (np.exp(zb) - partial) / (-1j * x[big]) ** m
    if np.any(small):
        zs = z[small]
        term = np.full(zs.shape, s**m / factorial(m), dtype=complex)
        acc = term.copy()
        a = 0
        while True:
            a += 1
            term = term * zs / (a + m)
            acc += term
            if np.all(np.abs(term) <= 1e-18 * np.abs(acc)) or a > 200:
                break
        out[small] = acc
    return out
