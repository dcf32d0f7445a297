"""Long-range Jacobi operators driven by the skew shift.

Matrix entries, for a fixed base point x:

    A_mm = v(T^m x)
    A_mn = phi_{m-n}(T^m x) + conj(phi_{n-m}(T^n x)),   m != n

with v a real nonconstant trigonometric polynomial and phi_k trigonometric
polynomials of degree < k^C1 and sup-norm < gamma e^{-k}.  Only phi_k with
1 <= k <= K_max are stored; the rest are zero, so the m < n entries reduce to
the conjugate of the m > n ones.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .dynamics import Frequency, TorusPoint, orbit_array
from .errors import InvalidArgument, NumericalError, ResourceLimit

MAX_WINDOW = 4096
GRID_POINTS = 64
GRID_AXES = 3
SUP_SAFETY = 2.0
# target fraction of gamma e^{-k} used when rescaling sampled hoppings
HOPPING_MARGIN = 0.99


@dataclass
class TrigPoly:
    """Finite Fourier series sum_l c_l e^{2 pi i <l, x>} on the d-torus."""

    dim: int
    terms: dict = field(default_factory=dict)
    real: bool = False

    def __post_init__(self):
        clean = {}
        for l, c in self.terms.items():
            l = tuple(int(v) for v in l)
            if len(l) != self.dim:
                raise InvalidArgument(f"frequency {l} does not have {self.dim} entries")
            clean[l] = complex(c)
        self.terms = clean
        self._freqs = np.array(list(clean), dtype=float).reshape(-1, self.dim)
        self._coefs = np.array(list(clean.values()), dtype=complex)

    @property
    def degree(self) -> int:
        return max((max(abs(v) for v in l) for l in self.terms), default=0)

    def is_conjugate_symmetric(self) -> bool:
        for l, c in self.terms.items():
            other = self.terms.get(tuple(-v for v in l), 0j)
            if other != c.conjugate():
                return False
        return True

    def is_constant(self) -> bool:
        return all(c == 0 for l, c in self.terms.items() if any(l))

    def coefficient_l1(self) -> float:
        return float(np.abs(self._coefs).sum())

    def scaled(self, factor: float) -> "TrigPoly":
        return TrigPoly(self.dim, {l: c * factor for l, c in self.terms.items()}, self.real)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Complex values at each row of ``points`` (shape (n, dim))."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.dim:
            raise InvalidArgument(f"points have {points.shape[1]} coordinates, expected {self.dim}")
        total = np.zeros(points.shape[0], dtype=complex)
        # elementwise accumulation in a fixed term order: a point's value does not
        # depend on the batch it is evaluated in (a BLAS product would)
        for l, c in zip(self._freqs, self._coefs):
            phase = np.zeros(points.shape[0])
            for i in range(self.dim):
                if l[i]:
                    phase += l[i] * points[:, i]
            total += c * np.exp(2j * np.pi * (phase % 1.0))
        return total

    def evaluate_real(self, points: np.ndarray) -> np.ndarray:
        vals = self.evaluate(points)
        if vals.size and np.abs(vals.imag).max() > 1e-10 * max(1.0, self.coefficient_l1()):
            raise NumericalError("real-valued polynomial produced a non-negligible imaginary part")
        return vals.real


def eval_trig_poly(p: TrigPoly, x: TorusPoint):
    """Value of p at x; a float when p is flagged real-valued."""
    if x.d != p.dim:
        raise InvalidArgument(f"dimension mismatch: poly {p.dim}, point {x.d}")
    pts = x.values()[None, :]
    if p.real:
        return float(p.evaluate_real(pts)[0])
    return complex(p.evaluate(pts)[0])


def _grid_slices(dim: int) -> np.ndarray:
    if dim <= GRID_AXES:
        return np.zeros((1, 0))
    return np.random.default_rng(0).random((4, dim - GRID_AXES))


def grid_max_modulus(p: TrigPoly) -> float:
    """max |p| over a 64-point-per-axis grid on the first three axes.

    Further axes are held at a few fixed pseudo-random slices.  Each term is
    separable, so the grid values are built from outer products.
    """
    if not p.terms:
        return 0.0
    axes = min(p.dim, GRID_AXES)
    g = np.arange(GRID_POINTS) / GRID_POINTS
    best = 0.0
    for rest in _grid_slices(p.dim):
        total = np.zeros((GRID_POINTS,) * axes, dtype=complex)
        for l, c in p.terms.items():
            term = c * np.exp(2j * np.pi * float(np.dot(l[axes:], rest)))
            for i in range(axes):
                shape = [1] * axes
                shape[i] = GRID_POINTS
                term = term * np.exp(2j * np.pi * l[i] * g).reshape(shape)
            total = total + term
        best = max(best, float(np.abs(total).max()))
    return best


def sup_norm_estimate(p: TrigPoly) -> float:
    """Conservative sup-norm estimate: twice the grid maximum, and never below
    the coefficient l1 norm (which bounds |p| everywhere)."""
    return max(SUP_SAFETY * grid_max_modulus(p), p.coefficient_l1())


def potential_range(v: TrigPoly) -> tuple[float, float]:
    """(min, max) of a real polynomial: grid extremes polished by local search."""
    from scipy.optimize import minimize

    axes = min(v.dim, GRID_AXES)
    n = 24
    g = np.arange(n) / n
    rng = np.random.default_rng(0)
    pts = np.stack(np.meshgrid(*([g] * axes), indexing="ij"), axis=-1).reshape(-1, axes)
    if v.dim > axes:
        pts = np.hstack([pts, np.broadcast_to(rng.random(v.dim - axes), (len(pts), v.dim - axes))])
    vals = v.evaluate_real(pts)
    out = []
    for sign in (1.0, -1.0):
        best = float(np.min(sign * vals))
        for i in np.argsort(sign * vals)[:8]:
            res = minimize(lambda y: sign * float(v.evaluate_real(y[None, :])[0]), pts[i],
                           method="L-BFGS-B")
            best = min(best, float(res.fun))
        out.append(sign * best)
    return out[0], out[1]


@dataclass
class HoppingFamily:
    gamma: float
    C1: float
    K_max: int
    phis: dict = field(default_factory=dict)

    def degree_cap(self, k: int) -> float:
        return max(1.0, float(k) ** self.C1)

    def phi(self, k: int) -> TrigPoly | None:
        return self.phis.get(k)


@dataclass
class OperatorSpec:
    d: int
    omega: Frequency
    v: TrigPoly
    hopping: HoppingFamily
    x0: TorusPoint
    seed: int | None = None

    @property
    def gamma(self) -> float:
        return self.hopping.gamma

    def violations(self) -> list[str]:
        """Every broken admissibility condition, as human-readable strings."""
        out = []
        hop = self.hopping
        if self.d < 3:
            out.append(f"d must be >= 3 (got {self.d})")
        if not hop.gamma > 0:
            out.append(f"gamma must be > 0 (got {hop.gamma})")
        if not hop.C1 >= 1:
            out.append(f"C1 must be >= 1 (got {hop.C1})")
        if self.v.dim != self.d:
            out.append(f"v has dimension {self.v.dim}, expected {self.d}")
        if self.x0.d != self.d:
            out.append(f"x0 has dimension {self.x0.d}, expected {self.d}")
        if not self.v.is_conjugate_symmetric():
            out.append("v must be real-valued (coefficients at -l must conjugate those at l)")
        if self.v.is_constant():
            out.append("v nonconstant: v has no nonzero coefficient at l != 0")
        for k in sorted(hop.phis):
            phi = hop.phis[k]
            if not 1 <= k <= hop.K_max:
                out.append(f"phi_{k} is stored outside 1..K_max={hop.K_max}")
                continue
            if phi.dim != self.d:
                out.append(f"phi_{k} has dimension {phi.dim}, expected {self.d}")
                continue
            if not phi.degree < hop.degree_cap(k):
                out.append(f"phi_{k} has degree {phi.degree}, must be < {hop.degree_cap(k):g}")
            bound = hop.gamma * math.exp(-k)
            est = sup_norm_estimate(phi)
            if not est < bound:
                out.append(f"phi_{k} sup-norm estimate {est:.6g} is not < gamma*e^-{k} = {bound:.6g}")
        return out


@dataclass
class WindowMatrix:
    interval: tuple
    energy: float
    entries: np.ndarray
    base_point: TorusPoint

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def sub(self, a: int, b: int) -> "WindowMatrix":
        """Restriction to the lattice sites [a, b] (which must lie inside the window)."""
        lo = a - self.interval[0]
        hi = b - self.interval[0]
        if lo < 0 or hi >= self.size or a > b:
            raise InvalidArgument(f"[{a}, {b}] is not inside {self.interval}")
        return WindowMatrix((a, b), self.energy, self.entries[lo:hi + 1, lo:hi + 1], self.base_point)

    def shifted(self, E: float) -> "WindowMatrix":
        """Same sites, energy E."""
        entries = self.entries + (self.energy - E) * np.eye(self.size)
        return WindowMatrix(self.interval, E, entries, self.base_point)


def _random_real_poly(rng: np.random.Generator, d: int, degree: int) -> TrigPoly:
    box = [l for l in itertools.product(range(-degree, degree + 1), repeat=d) if any(l)]
    half = [l for l in box if l > tuple(-v for v in l)]
    scale = 1.0 / math.sqrt(max(len(half), 1))
    terms = {}
    for l in half:
        c = scale * complex(rng.normal(), rng.normal()) / math.sqrt(2.0)
        terms[l] = c
        terms[tuple(-v for v in l)] = c.conjugate()
    terms[(0,) * d] = complex(rng.normal() * 0.1)
    return TrigPoly(d, terms, real=True)


def _random_hopping(rng: np.random.Generator, d: int, k: int, gamma: float, C1: float) -> TrigPoly:
    cap = max(1.0, float(k) ** C1)
    top = math.ceil(cap) - 1  # largest integer strictly below the cap
    n_terms = int(rng.integers(1, 4))
    terms: dict = {}
    for _ in range(n_terms):
        l = tuple(int(v) for v in rng.integers(-top, top + 1, size=d))
        terms[l] = terms.get(l, 0j) + complex(rng.normal(), rng.normal())
    raw = TrigPoly(d, terms)
    est = sup_norm_estimate(raw)
    if est == 0.0:
        return raw
    return raw.scaled(HOPPING_MARGIN * gamma * math.exp(-k) / est)


def sample_random_spec(seed: int, d: int = 3, gamma: float = 1e-3, C1: float = 2.0, K_max: int = 20,
                       v_degree: int = 2, omega: Frequency | None = None) -> OperatorSpec:
    """Draw an admissible operator deterministically from ``seed``.

    Each phi_k gets one to three random Fourier modes of degree < k^C1, rescaled
    so its sup-norm estimate sits just under gamma e^{-k}.  Random draws do not
    depend on gamma, so specs that differ only in gamma are exact rescalings of
    each other's hopping.
    """
    if d < 3:
        raise InvalidArgument("d must be >= 3")
    if not gamma > 0:
        raise InvalidArgument("gamma must be > 0")
    if C1 < 1:
        raise InvalidArgument("C1 must be >= 1")
    if K_max < 0 or v_degree < 1:
        raise InvalidArgument("need K_max >= 0 and v_degree >= 1")
    rng = np.random.default_rng(seed)
    v = _random_real_poly(rng, d, v_degree)
    phis = {k: _random_hopping(rng, d, k, gamma, C1) for k in range(1, K_max + 1)}
    x0 = TorusPoint.random(rng, d)
    omega = Frequency.golden_mean() if omega is None else omega
    return OperatorSpec(d, omega, v, HoppingFamily(float(gamma), float(C1), int(K_max), phis), x0, seed)


def with_hopping(spec: OperatorSpec, phis: Mapping[int, TrigPoly]) -> OperatorSpec:
    """Copy of ``spec`` with its hopping polynomials replaced."""
    hop = HoppingFamily(spec.hopping.gamma, spec.hopping.C1, spec.hopping.K_max, dict(phis))
    return OperatorSpec(spec.d, spec.omega, spec.v, hop, spec.x0, spec.seed)


def matrix_entry(spec: OperatorSpec, m: int, n: int, x: TorusPoint | None = None) -> complex:
    """Single entry A_mn at base point x (default: the spec's x0)."""
    x = spec.x0 if x is None else x
    if m == n:
        return complex(spec.v.evaluate_real(orbit_array(x, m, 1, spec.omega))[0])
    if m < n:
        return matrix_entry(spec, n, m, x).conjugate()
    phi = spec.hopping.phi(m - n)
    if phi is None:
        return 0j
    return complex(phi.evaluate(orbit_array(x, m, 1, spec.omega))[0])


def assemble_window(spec: OperatorSpec, interval: tuple, E: float = 0.0,
                    x: TorusPoint | None = None) -> WindowMatrix:
    """Dense R_I (H(x) - E) R_I on the lattice interval I = [a, b]."""
    a, b = int(interval[0]), int(interval[1])
    if b < a:
        raise InvalidArgument(f"empty interval [{a}, {b}]")
    if b - a > MAX_WINDOW:
        raise ResourceLimit(f"window [{a}, {b}] exceeds {MAX_WINDOW + 1} sites")
    x = spec.x0 if x is None else x
    if x.d != spec.d:
        raise InvalidArgument(f"base point has dimension {x.d}, expected {spec.d}")
    n = b - a + 1
    pts = orbit_array(x, a, n, spec.omega)
    H = np.zeros((n, n), dtype=complex)
    idx = np.arange(n)
    H[idx, idx] = spec.v.evaluate_real(pts) - E
    for k in range(1, min(spec.hopping.K_max, n - 1) + 1):
        phi = spec.hopping.phi(k)
        if phi is None or not phi.terms:
            continue
        vals = phi.evaluate(pts[k:])
        H[idx[k:], idx[:-k]] = vals
        H[idx[:-k], idx[k:]] = vals.conj()
    return WindowMatrix((a, b), float(E), H, x)
