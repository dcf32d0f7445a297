"""Skew-shift orbits on the d-torus.

The skew shift with frequency w acts on x = (x_1, ..., x_d) by

    (Tx)_i = x_i + x_{i+1}   (i < d),        (Tx)_d = x_d + w      (mod 1)

and has the closed form

    (T^n x)_i = sum_{k=0}^{d-i} C(n, k) x_{i+k} + C(n, d-i+1) w   (mod 1).

Coordinates are kept either as float64 or as fixed-point integers (numerators
over 2**bits).  The fixed-point path is exact, and it is the reference: the
products C(n, d) * w lose every float64 digit once n is a few thousand.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InvalidArgument, NotFound

DEFAULT_BITS = 256
_FLOAT_BITS = 53


def _check_bits(bits: int) -> None:
    if bits < _FLOAT_BITS or bits % 4:
        raise InvalidArgument(f"fixed-point bits must be a multiple of 4 and >= 53, got {bits}")


def float_to_fixed(value: float, bits: int) -> int:
    """Floor of ``frac(value) * 2**bits``, computed exactly."""
    f = Fraction(value)
    return (f.numerator << bits) // f.denominator & ((1 << bits) - 1)


def fixed_to_float(value: int, bits: int) -> float:
    # truncation keeps the result strictly below 1.0
    return (value >> (bits - _FLOAT_BITS)) * 2.0**-_FLOAT_BITS


def fixed_to_hex(value: int, bits: int) -> str:
    return "0x." + format(value, f"0{bits // 4}x")


def hex_to_fixed(text: str) -> tuple[int, int]:
    """Parse a ``0x.<digits>`` fraction; returns ``(numerator, bits)``."""
    if not text.startswith("0x.") or len(text) == 3:
        raise InvalidArgument(f"not a hexadecimal fraction: {text!r}")
    digits = text[3:]
    try:
        value = int(digits, 16)
    except ValueError as exc:
        raise InvalidArgument(f"not a hexadecimal fraction: {text!r}") from exc
    return value, 4 * len(digits)


def gbinom(n: int, k: int) -> int:
    """Binomial coefficient C(n, k) extended to negative ``n``."""
    if k < 0:
        return 0
    if n >= 0:
        return math.comb(n, k)
    return (-1) ** k * math.comb(k - n - 1, k)


@dataclass(frozen=True)
class TorusPoint:
    """A point of the d-torus.

    ``coords`` holds floats in [0, 1) when ``bits`` is None (float64 mode), and
    integers in [0, 2**bits) otherwise (fixed-point mode).  Construct through
    :meth:`from_floats` or :meth:`from_fixed`, which reduce mod 1.
    """

    coords: tuple
    bits: int | None = None

    def __post_init__(self):
        if len(self.coords) < 1:
            raise InvalidArgument("a torus point needs d >= 1 coordinates")

    @classmethod
    def from_floats(cls, values: Sequence[float], bits: int | None = None) -> "TorusPoint":
        values = [float(v) for v in values]
        if not all(math.isfinite(v) for v in values):
            raise InvalidArgument("torus coordinates must be finite")
        if bits is None:
            reduced = []
            for v in values:
                r = v % 1.0
                reduced.append(0.0 if r == 1.0 else r)
            return cls(tuple(reduced))
        _check_bits(bits)
        return cls(tuple(float_to_fixed(v, bits) for v in values), bits)

    @classmethod
    def from_fixed(cls, values: Sequence[int], bits: int = DEFAULT_BITS) -> "TorusPoint":
        _check_bits(bits)
        mask = (1 << bits) - 1
        return cls(tuple(int(v) & mask for v in values), bits)

    @classmethod
    def random(cls, rng: np.random.Generator, d: int, bits: int | None = DEFAULT_BITS) -> "TorusPoint":
        if bits is None:
            return cls.from_floats(rng.random(d))
        _check_bits(bits)
        nbytes = bits // 8 + 1
        return cls.from_fixed([int.from_bytes(rng.bytes(nbytes), "big") for _ in range(d)], bits)

    @property
    def d(self) -> int:
        return len(self.coords)

    @property
    def precision_mode(self) -> str:
        return "float64" if self.bits is None else f"fixedpoint({self.bits})"

    @property
    def is_fixed(self) -> bool:
        return self.bits is not None

    def values(self) -> np.ndarray:
        if self.bits is None:
            return np.array(self.coords, dtype=float)
        return np.array([fixed_to_float(c, self.bits) for c in self.coords])

    def to_fixed(self, bits: int = DEFAULT_BITS) -> "TorusPoint":
        if self.bits is None:
            return TorusPoint.from_floats(self.coords, bits)
        if bits >= self.bits:
            return TorusPoint.from_fixed([c << (bits - self.bits) for c in self.coords], bits)
        return TorusPoint.from_fixed([c >> (self.bits - bits) for c in self.coords], bits)

    def to_float(self) -> "TorusPoint":
        return TorusPoint(tuple(self.values().tolist()))

    def hex(self) -> list[str]:
        fixed = self if self.bits is not None else self.to_fixed()
        return [fixed_to_hex(c, fixed.bits) for c in fixed.coords]


@dataclass(frozen=True)
class Frequency:
    """Frequency w in (0, 1), stored as a fixed-point numerator over 2**bits.

    ``value`` is the float64 form; it is the truncation of the fixed-point
    value, so the two agree to within 2**-53.
    """

    fixed: int
    bits: int = DEFAULT_BITS
    dc_constant: float = 0.1

    def __post_init__(self):
        _check_bits(self.bits)
        if not 0 < self.fixed < (1 << self.bits):
            raise InvalidArgument("frequency must lie strictly between 0 and 1")
        if not self.dc_constant > 0:
            raise InvalidArgument("Diophantine constant must be positive")

    @property
    def value(self) -> float:
        return fixed_to_float(self.fixed, self.bits)

    def fixed_at(self, bits: int) -> int:
        if bits >= self.bits:
            return self.fixed << (bits - self.bits)
        return self.fixed >> (self.bits - bits)

    def hex(self) -> str:
        return fixed_to_hex(self.fixed, self.bits)

    @classmethod
    def golden_mean(cls, bits: int = DEFAULT_BITS, dc_constant: float = 0.3) -> "Frequency":
        """(sqrt(5) - 1) / 2 to ``bits`` fractional bits."""
        one = 1 << bits
        return cls((math.isqrt(5 << (2 * bits)) - one) >> 1, bits, dc_constant)

    @classmethod
    def quadratic_surd(cls, n: int, bits: int = DEFAULT_BITS, dc_constant: float = 0.01) -> "Frequency":
        """Fractional part of sqrt(n) for a non-square ``n``."""
        if n < 2 or math.isqrt(n) ** 2 == n:
            raise InvalidArgument(f"sqrt({n}) is rational")
        return cls(math.isqrt(n << (2 * bits)) - (math.isqrt(n) << bits), bits, dc_constant)

    @classmethod
    def from_float(cls, value: float, bits: int = DEFAULT_BITS, dc_constant: float = 0.1) -> "Frequency":
        if not 0 < value < 1:
            raise InvalidArgument("frequency must lie strictly between 0 and 1")
        return cls(float_to_fixed(value, bits), bits, dc_constant)

    @classmethod
    def from_hex(cls, text: str, dc_constant: float = 0.1) -> "Frequency":
        value, bits = hex_to_fixed(text)
        return cls(value, bits, dc_constant)


class DirectionVector(NamedTuple):
    j: int
    d: int
    raw: tuple  # integer entries (1, C(j,d), C(j,d-1), ..., C(j,1))
    components: tuple  # raw / ||raw||


class VandermondeCheck(NamedTuple):
    det: float
    independent: bool
    exact_det: int  # determinant of the unnormalised integer matrix


class DiophantineScan(NamedTuple):
    min_value: float
    worst_k: int


def _require_same_d(x: TorusPoint, a: TorusPoint) -> None:
    if x.d != a.d:
        raise InvalidArgument(f"dimension mismatch: {x.d} vs {a.d}")


def _step_fixed(coords: list, w: int, mask: int) -> list:
    d = len(coords)
    out = [(coords[i] + coords[i + 1]) & mask for i in range(d - 1)]
    out.append((coords[-1] + w) & mask)
    return out


def skew_step(x: TorusPoint, omega: Frequency) -> TorusPoint:
    """One application of the skew shift."""
    if x.d < 2:
        raise InvalidArgument("the skew shift needs d >= 2")
    if x.bits is None:
        c = x.coords
        y = [c[i] + c[i + 1] for i in range(x.d - 1)] + [c[-1] + omega.value]
        return TorusPoint.from_floats(y)
    mask = (1 << x.bits) - 1
    return TorusPoint(tuple(_step_fixed(list(x.coords), omega.fixed_at(x.bits), mask)), x.bits)


def _closed_form_fixed(coords: Sequence[int], w: int, n: int, bits: int) -> list:
    """T^n on fixed-point coordinates; valid for every integer n."""
    d = len(coords)
    mask = (1 << bits) - 1
    binoms = [gbinom(n, k) for k in range(d + 1)]
    out = []
    for i in range(d):
        acc = binoms[d - i] * w
        for k in range(d - i):
            acc += binoms[k] * coords[i + k]
        out.append(acc & mask)
    return out


def orbit_closed_form(x0: TorusPoint, n: int, omega: Frequency) -> TorusPoint:
    """T^n x0 from the binomial closed form with exact integer binomials.

    In float64 mode the coordinates are lifted to fixed point exactly, the
    orbit point is computed there, and only the result is rounded.
    """
    if n < 0:
        raise InvalidArgument(f"orbit time must be >= 0, got {n}")
    if x0.d < 2:
        raise InvalidArgument("the skew shift needs d >= 2")
    bits = x0.bits if x0.bits is not None else max(omega.bits, DEFAULT_BITS)
    fixed = x0 if x0.bits is not None else x0.to_fixed(bits)
    y = _closed_form_fixed(fixed.coords, omega.fixed_at(bits), n, bits)
    if x0.bits is None:
        return TorusPoint(tuple(fixed_to_float(c, bits) for c in y))
    return TorusPoint(tuple(y), bits)


def orbit_array(x0: TorusPoint, start: int, count: int, omega: Frequency) -> np.ndarray:
    """Float coordinates of T^n x0 for n = start, ..., start + count - 1.

    ``start`` may be negative.  The walk itself is exact (fixed point); rows
    are truncated to float64 only on output.
    """
    if count < 0:
        raise InvalidArgument("count must be >= 0")
    d = x0.d
    if d < 2:
        raise InvalidArgument("the skew shift needs d >= 2")
    bits = x0.bits if x0.bits is not None else max(omega.bits, DEFAULT_BITS)
    fixed = x0 if x0.bits is not None else x0.to_fixed(bits)
    w = omega.fixed_at(bits)
    mask = (1 << bits) - 1
    shift = bits - _FLOAT_BITS
    cur = _closed_form_fixed(fixed.coords, w, start, bits)
    rows = []
    append = rows.append
    last = d - 1
    for _ in range(count):
        append([c >> shift for c in cur])
        for i in range(last):
            cur[i] = (cur[i] + cur[i + 1]) & mask
        cur[last] = (cur[last] + w) & mask
    if not rows:
        return np.empty((0, d))
    return np.array(rows, dtype=np.int64) * 2.0**-_FLOAT_BITS


def torus_distance(x: TorusPoint, a: TorusPoint) -> float:
    """Sum over coordinates of the distance to the nearest integer of x_i - a_i."""
    _require_same_d(x, a)
    if x.precision_mode != a.precision_mode:
        raise InvalidArgument(f"precision mismatch: {x.precision_mode} vs {a.precision_mode}")
    if x.bits is None:
        return float(torus_distances(np.array([x.coords]), np.array(a.coords))[0])
    one = 1 << x.bits
    total = 0
    for xi, ai in zip(x.coords, a.coords):
        delta = (xi - ai) % one
        total += min(delta, one - delta)
    return total / one


def torus_distances(points: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Vectorised :func:`torus_distance` of each row of ``points`` to ``a``."""
    delta = np.abs(points - a) % 1.0
    return np.minimum(delta, 1.0 - delta).sum(axis=-1)


def check_diophantine(omega: Frequency, K: int) -> DiophantineScan:
    """Minimum of k^2 * ||k w|| over 0 < k <= K, scanned exactly in fixed point."""
    if K < 1:
        raise InvalidArgument("K must be >= 1")
    one = 1 << omega.bits
    best_num, best_k = None, 1
    kw = 0
    for k in range(1, K + 1):
        kw = (kw + omega.fixed) % one
        num = k * k * min(kw, one - kw)
        if best_num is None or num < best_num:
            best_num, best_k = num, k
    return DiophantineScan(float(Fraction(best_num, one)), best_k)


def continued_fraction_denominators(omega: Frequency, limit: int) -> list[int]:
    """Denominators q_0 <= q_1 <= ... of the convergents of w, all below ``limit``."""
    p, q = omega.fixed, 1 << omega.bits
    q_prev, q_cur = 0, 1
    out = [1]
    while p:
        a, rem = divmod(q, p)
        q, p = p, rem
        # the first partial quotient after a0 = 0
        q_prev, q_cur = q_cur, a * q_cur + q_prev
        if q_cur >= limit:
            break
        out.append(q_cur)
    return out


def best_approximant(omega: Frequency, L: int) -> int:
    """Largest continued-fraction denominator q of w with sqrt(L) < q < L."""
    if L < 4:
        raise InvalidArgument("L must be >= 4")
    if L.bit_length() > omega.bits // 2 - 8:
        raise InvalidArgument(f"L exceeds what {omega.bits}-bit precision resolves")
    candidates = [q for q in continued_fraction_denominators(omega, L) if q * q > L]
    if not candidates:
        raise NotFound(f"no continued-fraction denominator in (sqrt({L}), {L})")
    return max(candidates)


def direction_vector(j: int, d: int) -> DirectionVector:
    """Unit vector along (1, C(j,d), C(j,d-1), ..., C(j,1))."""
    if j < 1 or d < 2:
        raise InvalidArgument("need j >= 1 and d >= 2")
    raw = (1,) + tuple(math.comb(j, k) for k in range(d, 0, -1))
    norm = math.sqrt(sum(r * r for r in raw))
    return DirectionVector(j, d, raw, tuple(r / norm for r in raw))


def _bareiss_det(rows: list[list[int]]) -> int:
    m = [list(r) for r in rows]
    n = len(m)
    sign, prev = 1, 1
    for k in range(n - 1):
        if m[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if m[i][k] != 0), None)
            if swap is None:
                return 0
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[-1][-1]


def vandermonde_independent(js: Sequence[int], d: int, tol: float = 1e-12) -> VandermondeCheck:
    """Determinant of the matrix whose columns are the direction vectors of ``js``.

    The determinant is evaluated exactly on the integer vectors and then divided
    by the product of their norms, so ``det`` is accurate even when the unit
    vectors are nearly parallel.
    """
    js = [int(j) for j in js]
    if len(js) != d + 1:
        raise InvalidArgument(f"need exactly d+1 = {d + 1} indices, got {len(js)}")
    if len(set(js)) != len(js):
        raise InvalidArgument(f"indices must be distinct: {js}")
    vecs = [direction_vector(j, d) for j in js]
    rows = [[v.raw[r] for v in vecs] for r in range(d + 1)]
    exact = _bareiss_det(rows)
    norms = math.prod(math.sqrt(sum(c * c for c in v.raw)) for v in vecs)
    det = exact / norms
    return VandermondeCheck(det, abs(det) > tol, exact)


def vandermonde_exact_formula(js: Sequence[int], d: int) -> Fraction:
    """Closed form of the integer determinant: prod_{a<b} (j_b - j_a) / prod_{k<=d} k!."""
    num = math.prod(b - a for a, b in combinations(js, 2))
    den = math.prod(math.factorial(k) for k in range(1, d + 1))
    # rows are ordered 1, C(j,d), ..., C(j,1); reversing the d binomial rows costs a sign
    sign = (-1) ** (d * (d - 1) // 2)
    return Fraction(sign * num, den)
