"""Equidistribution of skew-shift orbits: hit counts, Fejer majorants and Weyl sums."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import Frequency, TorusPoint, orbit_array, torus_distances
from .errors import InvalidArgument

WEYL_C = 10.0
WEYL_THETA = 0.05


@dataclass(frozen=True)
class HitStats:
    L: int
    epsilon: float
    target: TorusPoint
    count: int
    bound_ratio: float  # count / (epsilon**d * L)


@dataclass(frozen=True)
class WeylRecord:
    k: tuple
    L: int
    value: float
    case_index: int
    predicted_bound: float

    @property
    def ratio(self) -> float:
        return self.value / self.predicted_bound

    def to_row(self) -> dict:
        row = {f"k{i + 1}": ki for i, ki in enumerate(self.k)}
        row.update(L=self.L, S_k=self.value, case_j=self.case_index,
                   predicted_bound=self.predicted_bound, ratio=self.ratio)
        return row


@dataclass(frozen=True)
class WeylAggregate:
    sum: float
    ratio_to_L: float
    n_terms: int


def fejer_kernel(R: int, t):
    """F_R(t) = sum_{|l| < R} (1 - |l|/R) e^{2 pi i l t}, summed coefficient by coefficient."""
    if R < 1:
        raise InvalidArgument("R must be >= 1")
    t = np.asarray(t, dtype=float)
    l = np.arange(1, R)
    weights = 1.0 - l / R
    out = 1.0 + 2.0 * np.tensordot(np.cos(2 * np.pi * np.multiply.outer(t, l)), weights, axes=1)
    return float(out) if out.ndim == 0 else out


def fejer_kernel_closed(R: int, t):
    """(1/R) (sin(pi R t) / sin(pi t))^2, with the removable singularity at integers filled."""
    t = np.asarray(t, dtype=float)
    s = np.sin(np.pi * t)
    at_int = np.isclose(s, 0.0, atol=1e-15)
    safe = np.where(at_int, 1.0, s)
    out = np.where(at_int, float(R), np.sin(np.pi * R * t) ** 2 / (R * safe**2))
    return float(out) if out.ndim == 0 else out


def default_fejer_order(epsilon: float) -> int:
    # R * eps stays in [1/2, 1): every coordinate of the ball sits in the main lobe
    return math.ceil(1.0 / (2.0 * epsilon))


def fejer_majorant(x: np.ndarray, epsilon: float, R: int, C: float) -> np.ndarray:
    """C * eps^d * prod_j F_R(x_j) for each row of ``x``."""
    x = np.atleast_2d(x)
    d = x.shape[1]
    return C * epsilon**d * np.prod(fejer_kernel_closed(R, x), axis=1)


def sample_l1_ball(rng: np.random.Generator, d: int, radius: float, n: int) -> np.ndarray:
    """Uniform samples from the open l1 ball of the given radius around 0."""
    direction = rng.dirichlet(np.ones(d), size=n)
    r = radius * rng.random(n) ** (1.0 / d)
    signs = rng.choice([-1.0, 1.0], size=(n, d))
    return signs * direction * r[:, None]


def fejer_majorant_check(epsilon: float, samples: int, d: int = 3, *, C: float | None = None,
                         R: int | None = None, seed: int = 0) -> bool:
    """Check that the indicator of the eps-ball is below C eps^d prod F_R on random ball points."""
    if not 0 < epsilon < 0.5:
        raise InvalidArgument("need 0 < epsilon < 1/2")
    C = 4.0**d if C is None else C
    R = default_fejer_order(epsilon) if R is None else R
    rng = np.random.default_rng(seed)
    pts = sample_l1_ball(rng, d, epsilon, samples)
    return bool(np.all(fejer_majorant(pts, epsilon, R, C) >= 1.0))


def hit_counts(x: TorusPoint, a: TorusPoint, epsilons: Sequence[float], L: int,
               omega: Frequency) -> list[HitStats]:
    """:func:`hit_count` for several radii on one orbit."""
    if L < 1:
        raise InvalidArgument("L must be >= 1")
    if x.d != a.d:
        raise InvalidArgument(f"dimension mismatch: {x.d} vs {a.d}")
    if any(not e > 0 for e in epsilons):
        raise InvalidArgument("epsilon must be > 0")
    dist = torus_distances(orbit_array(x, 1, L, omega), a.values())
    out = []
    for eps in epsilons:
        count = int(np.count_nonzero(dist < eps))
        out.append(HitStats(L, float(eps), a, count, count / (eps**x.d * L)))
    return out


def hit_count(x: TorusPoint, a: TorusPoint, epsilon: float, L: int, omega: Frequency) -> HitStats:
    """Number of 1 <= n <= L with ||T^n x - a|| < epsilon."""
    return hit_counts(x, a, [epsilon], L, omega)[0]


def case_index(k: Sequence[int]) -> int:
    """d minus the (1-based) position of the first nonzero entry of k."""
    for pos, ki in enumerate(k, start=1):
        if ki != 0:
            return len(k) - pos
    raise InvalidArgument("k must be nonzero")


def weyl_exponent(j: int, theta: float = WEYL_THETA) -> float:
    """Power of L in the predicted bound for case ``j``."""
    if j == 0:
        return 0.0
    if j == 1:
        return 0.75
    return 1.0 - 2.0 ** -(j + 1) + theta


def weyl_bound(k: Sequence[int], L: int, d: int | None = None, *, C: float = WEYL_C,
               theta: float = WEYL_THETA) -> float:
    """Predicted upper bound for S_k, chosen by the leading nonzero entry of k."""
    k = tuple(int(v) for v in k)
    if d is not None and len(k) != d:
        raise InvalidArgument(f"k has {len(k)} entries, expected {d}")
    j = case_index(k)
    lead = abs(k[len(k) - 1 - j])
    if j == 0:
        return C * lead**2
    return C * lead ** (2.0**-j) * L ** weyl_exponent(j, theta)


def weyl_sum(x: TorusPoint, k: Sequence[int], L: int, omega: Frequency, *,
             C: float = WEYL_C, theta: float = WEYL_THETA) -> WeylRecord:
    """S_k = |sum_{n=1}^L exp(2 pi i <T^n x, k>)| with exactly rounded summation."""
    k = tuple(int(v) for v in k)
    if len(k) != x.d:
        raise InvalidArgument(f"k has {len(k)} entries, expected {x.d}")
    if not any(k):
        raise InvalidArgument("k must be nonzero")
    if L < 1:
        raise InvalidArgument("L must be >= 1")
    pts = orbit_array(x, 1, L, omega)
    phase = (pts @ np.array(k, dtype=float)) % 1.0
    angle = 2.0 * np.pi * phase
    value = math.hypot(math.fsum(np.cos(angle)), math.fsum(np.sin(angle)))
    return WeylRecord(k, L, value, case_index(k), weyl_bound(k, L, C=C, theta=theta))


def weyl_sums_box(x: TorusPoint, K: int, L: int, omega: Frequency, *,
                  block: int | None = None) -> np.ndarray:
    """|sum_n exp(2 pi i <T^n x, k>)| for every k in the box [-K, K]^d.

    Returned array has shape (2K+1,)*d and is indexed by k + K.  The exponential
    factorises over coordinates, so each block of orbit points is contracted with
    one matrix product; blocks are merged with Neumaier-compensated addition.
    """
    if K < 0 or L < 1:
        raise InvalidArgument("need K >= 0 and L >= 1")
    d = x.d
    ks = np.arange(-K, K + 1)
    width = ks.size
    tail_cols = width ** (d - 1)
    if block is None:
        block = max(256, min(8192, 2**22 // max(tail_cols, 1)))
    re_sum, re_comp = np.zeros((width, tail_cols)), np.zeros((width, tail_cols))
    im_sum, im_comp = np.zeros_like(re_sum), np.zeros_like(re_sum)
    pts = orbit_array(x, 1, L, omega)
    for lo in range(0, L, block):
        y = pts[lo:lo + block]
        factors = [np.exp(2j * np.pi * np.multiply.outer(y[:, i], ks)) for i in range(d)]
        tail = factors[d - 1]
        for i in range(d - 2, 0, -1):
            tail = (factors[i][:, :, None] * tail[:, None, :]).reshape(len(y), -1)
        part = factors[0].T @ tail
        re_sum = _neumaier_add(re_sum, re_comp, part.real)
        im_sum = _neumaier_add(im_sum, im_comp, part.imag)
    return np.hypot(re_sum + re_comp, im_sum + im_comp).reshape((width,) * d)


def _neumaier_add(total: np.ndarray, comp: np.ndarray, part: np.ndarray) -> np.ndarray:
    """Return total + part; the rounding error is accumulated into ``comp`` in place."""
    s = total + part
    comp += np.where(np.abs(total) >= np.abs(part), (total - s) + part, (part - s) + total)
    return s


def aggregate_range(epsilon: float, d: int, norm: str = "linf") -> list[tuple]:
    """Nonzero integer vectors with |k| < 1/epsilon in the chosen norm."""
    kmax = math.ceil(1.0 / epsilon) - 1
    out = []
    for k in itertools.product(range(-kmax, kmax + 1), repeat=d):
        if not any(k):
            continue
        size = sum(abs(v) for v in k) if norm == "l1" else max(abs(v) for v in k)
        if size < 1.0 / epsilon:
            out.append(k)
    return out


def aggregate_regime_floor(L: int, d: int) -> float:
    """Smallest admissible epsilon for the aggregate bound at orbit length L."""
    return L ** (-1.0 / ((d + 1) * 2 ** (d + 1)))


def weyl_aggregate(x: TorusPoint, epsilon: float, L: int, omega: Frequency, *,
                   norm: str = "linf", enforce_regime: bool = True) -> WeylAggregate:
    """Sum of S_k over 0 < |k| < 1/epsilon.

    With ``enforce_regime`` the call is refused unless epsilon exceeds
    L^(-1/((d+1) 2^(d+1))), the range in which the sum is claimed to be O(L).
    Desk-scale experiments pass ``enforce_regime=False``.
    """
    if norm not in ("linf", "l1"):
        raise InvalidArgument(f"unknown norm {norm!r}")
    if not epsilon > 0:
        raise InvalidArgument("epsilon must be > 0")
    d = x.d
    if enforce_regime and not epsilon > aggregate_regime_floor(L, d):
        raise InvalidArgument(
            f"epsilon={epsilon} is below the admissible floor {aggregate_regime_floor(L, d):.4f} for L={L}")
    ks = aggregate_range(epsilon, d, norm)
    if not ks:
        return WeylAggregate(0.0, 0.0, 0)
    K = max(max(abs(v) for v in k) for k in ks)
    box = weyl_sums_box(x, K, L, omega)
    total = math.fsum(box[tuple(np.array(k) + K)] for k in ks)
    return WeylAggregate(total, total / L, len(ks))
