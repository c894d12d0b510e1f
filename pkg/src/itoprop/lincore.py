"""
State vectors, Fourier grids, pulses and Hamiltonians of the form

    H(t) = H0 + E(t) mu

in Hartree atomic units (hbar = 1).

States are plain complex numpy arrays. The representation (number of
levels, grid size, or two stacked surfaces) is owned by the model, which
validates every state it is handed.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import DimensionError

# relative widening of the half-width of the spectral interval
SPECTRAL_MARGIN = 0.05


def norm(psi):
    """Euclidean norm sqrt(sum |a_i|^2)."""
    return float(np.linalg.norm(psi))


def inner(phi, psi):
    """<phi|psi>, conjugate-linear in the first argument."""
    phi = np.asarray(phi)
    psi = np.asarray(psi)
    if phi.shape != psi.shape:
        raise DimensionError(f"shape mismatch {phi.shape} vs {psi.shape}")
    return complex(np.vdot(phi, psi))


def axpy(alpha, phi, psi):
    """Return alpha*phi + psi as a new array."""
    phi = np.asarray(phi)
    psi = np.asarray(psi)
    if phi.shape != psi.shape:
        raise DimensionError(f"shape mismatch {phi.shape} vs {psi.shape}")
    return alpha * phi + psi


@dataclass(frozen=True)
class FourierGrid:
    """Periodic equidistant grid r_i = r_min + i*dr, i = 0..n_points-1."""

    n_points: int
    r_min: float
    r_max: float

    def __post_init__(self):
        n = self.n_points
        if n < 2 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two, got {n}")
        if not self.r_max > self.r_min:
            raise ValueError("r_max must exceed r_min")

    @property
    def length(self):
        return self.r_max - self.r_min

    @property
    def dr(self):
        return self.length / self.n_points

    @cached_property
    def r(self):
        return self.r_min + self.dr * np.arange(self.n_points)

    @cached_property
    def k(self):
        # standard FFT ordering: 0, positive frequencies, then negative ones
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dr)

    @property
    def k_max(self):
        return np.pi / self.dr

    def kinetic_energies(self, mass):
        return self.k**2 / (2.0 * mass)

    def kinetic_cutoff(self, mass):
        return self.k_max**2 / (2.0 * mass)

    def to_momentum(self, psi, axis=-1):
        return sfft.fft(psi, axis=axis, norm="ortho")

    def from_momentum(self, phi, axis=-1):
        return sfft.ifft(phi, axis=axis, norm="ortho")

    def dense_kinetic(self, mass):
        """Kinetic matrix in closed form (periodic Fourier-grid formula, even N)."""
        n = self.n_points
        idx = np.arange(n)
        diff = idx[:, None] - idx[None, :]
        pref = (np.pi / self.dr) ** 2 / mass
        with np.errstate(divide="ignore", invalid="ignore"):
            off = pref * (-1.0) ** diff / (n**2 * np.sin(np.pi * diff / n) ** 2)
        diag = pref / 6.0 * (1.0 + 2.0 / n**2)
        return np.where(diff == 0, diag, off)


@dataclass(frozen=True)
class Pulse:
    """Field E(t) = e0 S(t) cos(omega0 t + phase), S(t) = sin^2(pi (t - t_start) / t_env).

    With ``half=True`` the two-level form E(t) = e0 S(t) / 2 is used (no carrier).
    The envelope vanishes outside [t_start, t_start + t_env].
    """

    e0: float
    t_env: float
    t_start: float = 0.0
    omega0: float = 0.0
    phase: float = 0.0
    half: bool = False

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        s = t - self.t_start
        inside = (s >= 0.0) & (s <= self.t_env)
        return np.where(inside, np.sin(np.pi * s / self.t_env) ** 2, 0.0)

    def field(self, t):
        env = self.envelope(t)
        if self.half:
            val = 0.5 * self.e0 * env
        else:
            val = self.e0 * env * np.cos(self.omega0 * np.asarray(t, dtype=float) + self.phase)
        return val if np.ndim(val) else float(val)

    def field_difference(self, t, t_ref):
        """E(t) - E(t_ref) without cancellation for nearby times."""
        t = np.asarray(t, dtype=float)
        a = np.pi * (t - self.t_start) / self.t_env
        b = np.pi * (t_ref - self.t_start) / self.t_env
        inside = (a >= 0.0) & (a <= np.pi) & (0.0 <= b <= np.pi)
        # sin^2 a - sin^2 b = sin(a - b) sin(a + b); near the pulse end use the
        # reflected angles pi - a, pi - b measured from t_end to keep digits
        ar = np.pi * (self.t_end - t) / self.t_env
        br = np.pi * (self.t_end - t_ref) / self.t_env
        ds = np.where(a + b <= np.pi, np.sin(a - b) * np.sin(a + b),
                      np.sin(ar - br) * np.sin(ar + br))
        if self.half:
            diff = 0.5 * self.e0 * ds
        else:
            x = self.omega0 * t + self.phase
            y = self.omega0 * t_ref + self.phase
            dc = -2.0 * np.sin(0.5 * (x + y)) * np.sin(0.5 * (x - y))
            diff = self.e0 * (ds * np.cos(x) + np.sin(b) ** 2 * dc)
        direct = np.asarray(self.field(t)) - self.field(t_ref)
        out = np.where(inside, diff, direct)
        return out if np.ndim(out) else float(out)

    @property
    def max_abs(self):
        return abs(self.e0) * (0.5 if self.half else 1.0)

    @property
    def t_end(self):
        return self.t_start + self.t_env


class HamiltonianModel:
    """Base class: H(t) = H0 + E(t) mu with E(t) the sum of all pulse fields.

    Subclasses provide ``apply_h0``, ``apply_mu``, ``dense_h0``, ``dense_mu`` and
    ``_raw_range(w_max)`` (unwidened spectral interval).
    """

    kind = "abstract"
    dim = 0

    def __init__(self, pulses=()):
        self.pulses = tuple(pulses)

    # -- field ---------------------------------------------------------------
    def field(self, t):
        if not self.pulses:
            return np.zeros_like(t, dtype=float) if np.ndim(t) else 0.0
        total = self.pulses[0].field(t)
        for p in self.pulses[1:]:
            total = total + p.field(t)
        return total

    def field_difference(self, t, t_ref):
        """E(t) - E(t_ref), evaluated pulse by pulse to avoid cancellation."""
        if not self.pulses:
            return np.zeros_like(t, dtype=float) if np.ndim(t) else 0.0
        total = self.pulses[0].field_difference(t, t_ref)
        for p in self.pulses[1:]:
            total = total + p.field_difference(t, t_ref)
        return total

    @property
    def max_field(self):
        return sum(p.max_abs for p in self.pulses)

    # -- operator application -----------------------------------------------
    def check(self, psi):
        psi = np.asarray(psi)
        if psi.shape[-1] != self.dim:
            raise DimensionError(f"{self.kind} model expects length {self.dim}, got {psi.shape[-1]}")
        return psi

    def apply_h0(self, psi):
        raise NotImplementedError

    def apply_mu(self, psi):
        raise NotImplementedError

    def apply_frozen(self, w, psi):
        """(H0 + w mu) psi."""
        psi = self.check(psi)
        out = self.apply_h0(psi)
        if w != 0.0:
            out = out + w * self.apply_mu(psi)
        return out

    def apply_h_at(self, t, psi):
        return self.apply_frozen(float(self.field(t)), psi)

    def residual_apply(self, t, w, psi):
        """(E(t) - w) mu psi; an exact zero vector when E(t) == w."""
        psi = self.check(psi)
        d = float(self.field(t)) - w
        if d == 0.0:
            return np.zeros(psi.shape, dtype=complex)
        return d * self.apply_mu(psi)

    # -- spectrum ------------------------------------------------------------
    def spectral_range(self, w_max=None):
        """Interval (E_min, E_max) containing the spectrum of H0 + w mu for |w| <= w_max,
        half-width widened by 5%."""
        if w_max is None:
            w_max = self.max_field
        lo, hi = self._raw_range(abs(w_max))
        center = 0.5 * (hi + lo)
        half = 0.5 * (hi - lo) * (1.0 + SPECTRAL_MARGIN)
        # degenerate interval (e.g. H = 0): keep the scaling finite
        half = max(half, 1e-12 * max(1.0, abs(center)))
        return center - half, center + half

    @cached_property
    def spectral_bounds(self):
        return self.spectral_range()

    def _raw_range(self, w_max):
        raise NotImplementedError

    def dense_h0(self):
        raise NotImplementedError

    def dense_mu(self):
        raise NotImplementedError


class LevelModel(HamiltonianModel):
    """Finite-level system with explicit Hermitian matrices H0 and mu."""

    kind = "levels"

    def __init__(self, h0, mu, pulses=()):
        super().__init__(pulses)
        self.h0 = np.asarray(h0, dtype=complex)
        self.mu = np.asarray(mu, dtype=complex)
        if self.h0.shape != self.mu.shape or self.h0.shape[0] != self.h0.shape[1]:
            raise DimensionError("h0 and mu must be square matrices of equal size")
        self.dim = self.h0.shape[0]

    def apply_h0(self, psi):
        return psi @ self.h0.T

    def apply_mu(self, psi):
        return psi @ self.mu.T

    def _raw_range(self, w_max):
        # Weyl: eig(H0 + w mu) lies within eig(H0) +/- |w| ||mu||_2
        ev = np.linalg.eigvalsh(self.h0)
        mu_norm = np.linalg.norm(self.mu, 2)
        return ev[0] - w_max * mu_norm, ev[-1] + w_max * mu_norm

    def dense_h0(self):
        return self.h0.copy()

    def dense_mu(self):
        return self.mu.copy()


class GridModel(HamiltonianModel):
    """Single surface on a Fourier grid: H0 = T + V(r), coupling mu(r) (diagonal)."""

    kind = "grid"

    def __init__(self, grid, potential, dipole, mass=1.0, pulses=()):
        super().__init__(pulses)
        self.grid = grid
        self.mass = float(mass)
        self.potential = np.asarray(potential, dtype=float)
        self.dipole = np.broadcast_to(np.asarray(dipole, dtype=float), self.potential.shape).copy()
        self.dim = grid.n_points
        self.tk = grid.kinetic_energies(self.mass)

    def apply_kinetic(self, psi):
        return sfft.ifft(self.tk * sfft.fft(psi, axis=-1), axis=-1)

    def apply_h0(self, psi):
        return self.apply_kinetic(psi) + self.potential * psi

    def apply_mu(self, psi):
        return self.dipole * psi

    def _raw_range(self, w_max):
        dmax = np.max(np.abs(self.dipole))
        lo = self.potential.min() - w_max * dmax
        hi = self.potential.max() + w_max * dmax + self.grid.kinetic_cutoff(self.mass)
        return lo, hi

    def dense_h0(self):
        return self.grid.dense_kinetic(self.mass) + np.diag(self.potential)

    def dense_mu(self):
        return np.diag(self.dipole)


class TwoSurfaceModel(HamiltonianModel):
    """Two electronic surfaces on one Fourier grid.

    State layout: ground-surface amplitudes followed by excited-surface
    amplitudes. H0 = diag(T + V_g, T + V_e); the coupling mu(r) E(t) acts
    block off-diagonally.
    """

    kind = "two_surface"

    def __init__(self, grid, v_ground, v_excited, dipole=1.0, mass=1.0, pulses=()):
        super().__init__(pulses)
        self.grid = grid
        self.mass = float(mass)
        self.v_ground = np.asarray(v_ground, dtype=float)
        self.v_excited = np.asarray(v_excited, dtype=float)
        self.dipole = np.broadcast_to(np.asarray(dipole, dtype=float), self.v_ground.shape).copy()
        self.n = grid.n_points
        self.dim = 2 * self.n
        self.tk = grid.kinetic_energies(self.mass)
        self.potential = np.concatenate([self.v_ground, self.v_excited])

    def surfaces(self, psi):
        """View of psi as (..., 2, N)."""
        return psi.reshape(psi.shape[:-1] + (2, self.n))

    def apply_kinetic(self, psi):
        s = self.surfaces(psi)
        out = sfft.ifft(self.tk * sfft.fft(s, axis=-1), axis=-1)
        return out.reshape(psi.shape)

    def apply_h0(self, psi):
        return self.apply_kinetic(psi) + self.potential * psi

    def apply_mu(self, psi):
        s = self.surfaces(psi)
        out = np.empty_like(s, dtype=complex)
        out[..., 0, :] = self.dipole * s[..., 1, :]
        out[..., 1, :] = self.dipole * s[..., 0, :]
        return out.reshape(psi.shape)

    def _raw_range(self, w_max):
        dmax = np.max(np.abs(self.dipole))
        lo = self.potential.min() - w_max * dmax
        hi = self.potential.max() + w_max * dmax + self.grid.kinetic_cutoff(self.mass)
        return lo, hi

    def dense_h0(self):
        kin = self.grid.dense_kinetic(self.mass)
        z = np.zeros_like(kin)
        return np.block([[kin + np.diag(self.v_ground), z], [z, kin + np.diag(self.v_excited)]])

    def dense_mu(self):
        d = np.diag(self.dipole)
        z = np.zeros_like(d)
        return np.block([[z, d], [d, z]])

    def excited_population(self, psi):
        return float(np.sum(np.abs(self.surfaces(psi)[..., 1, :]) ** 2, axis=-1))

    def ground_population(self, psi):
        return float(np.sum(np.abs(self.surfaces(psi)[..., 0, :]) ** 2, axis=-1))
