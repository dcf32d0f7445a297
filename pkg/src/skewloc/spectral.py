"""Finite-volume Green's functions, their decay, and eigenvector localization."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg as la
from scipy.stats import binomtest

from .dynamics import TorusPoint
from .errors import InvalidArgument, NumericalError, ResourceLimit, SingularWindow
from .operator import MAX_WINDOW, OperatorSpec, WindowMatrix, assemble_window

SINGULAR_PIVOT = 1e-14
MAX_EIGEN_WINDOW = 2048
TINY = 1e-300


@dataclass(frozen=True)
class GreenThresholds:
    """Good/bad thresholds.  ``norm_cap=None`` means e^{N^norm_exponent}."""

    rate_floor: float = 0.01
    norm_exponent: float = 0.9
    norm_cap: float | None = None

    def cap(self, N: int) -> float:
        if self.norm_cap is not None:
            return self.norm_cap
        return math.exp(N**self.norm_exponent)


@dataclass(frozen=True)
class GreenReport:
    interval: tuple
    E: float
    op_norm: float
    decay_rate: float
    max_far_entry: float
    good: bool
    norm_cap: float
    rate_floor: float

    def to_row(self) -> dict:
        row = asdict(self)
        a, b = row.pop("interval")
        return {"a": a, "b": b, **row}


@dataclass(frozen=True)
class BadSetEstimate:
    N: int
    E: float
    samples: int
    bad_fraction: float
    confidence_halfwidth: float

    @property
    def bad_count(self) -> int:
        return round(self.bad_fraction * self.samples)

    def to_json(self) -> dict:
        return {"N": self.N, "E": self.E, "samples": self.samples,
                "bad_fraction": self.bad_fraction, "ci95": self.confidence_halfwidth}


@dataclass(frozen=True)
class LocalizationRecord:
    eigenvalue: float
    center: int
    decay_rate: float
    participation_ratio: float

    def to_row(self) -> dict:
        return asdict(self)


class EigenSystem(NamedTuple):
    values: np.ndarray  # ascending
    vectors: np.ndarray  # columns


class PasteResult(NamedTuple):
    hypotheses_hold: bool
    conclusion_holds: bool


class ResonanceDistance(NamedTuple):
    min_dist: float
    j: int


# --- Green's functions -----------------------------------------------------

def invert_window(H: np.ndarray) -> tuple[np.ndarray, float]:
    """Inverse by pivoted LU, and the max-entry residual of H G - I."""
    n = H.shape[0]
    scale = float(np.abs(H).max()) or 1.0
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularWindow
        warnings.simplefilter("ignore", la.LinAlgWarning)
        lu, piv = la.lu_factor(H, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < SINGULAR_PIVOT * scale:
        raise SingularWindow(f"pivot {pivots.min():.3g} below {SINGULAR_PIVOT:g} x scale {scale:.3g}")
    G = la.lu_solve((lu, piv), np.eye(n, dtype=H.dtype))
    residual = float(np.abs(H @ G - np.eye(n)).max())
    cond_proxy = n * scale * float(np.abs(G).max())
    if not residual < 1e-8 * max(cond_proxy, 1.0):
        raise NumericalError(f"inverse residual {residual:.3g} too large (cond proxy {cond_proxy:.3g})")
    return G, residual


def green_function(w: WindowMatrix, *, with_residual: bool = False):
    """G = (R_I (H - E) R_I)^{-1}.  Raises :class:`SingularWindow` when E is
    numerically in the spectrum of the window."""
    if w.size > MAX_WINDOW + 1:
        raise ResourceLimit(f"window of {w.size} sites is too large to invert")
    if not np.all(np.isfinite(w.entries)):
        raise InvalidArgument("window matrix has non-finite entries")
    G, residual = invert_window(w.entries)
    return (G, residual) if with_residual else G


def operator_norm(G: np.ndarray, rtol: float = 1e-6, max_iter: int = 10_000) -> float:
    """Largest singular value by power iteration on G* G.

    Starts from the column of largest norm, so the estimate never falls below
    the largest column norm (hence below the largest entry).
    """
    col = np.linalg.norm(G, axis=0)
    if col.max() == 0:
        return 0.0
    v = np.zeros(G.shape[1], dtype=complex)
    v[int(col.argmax())] = 1.0
    sigma = float(col.max())
    for _ in range(max_iter):
        w = G.conj().T @ (G @ v)
        nw = np.linalg.norm(w)
        new = math.sqrt(nw)
        v = w / nw
        if abs(new - sigma) <= rtol * new:
            return max(new, sigma)
        sigma = max(new, sigma)
    return sigma


def _distance_matrix(n: int) -> np.ndarray:
    idx = np.arange(n)
    return np.abs(idx[:, None] - idx[None, :])


def envelope_decay_rate(mod: np.ndarray, dist: np.ndarray, mask: np.ndarray) -> float:
    """Least-squares rate c in max_{|m-n|=r} |G(m,n)| ~ e^{-c r} over the masked pairs."""
    rs = np.unique(dist[mask])
    env = np.array([mod[mask & (dist == r)].max() for r in rs]) if rs.size else np.array([])
    keep = env > TINY
    if keep.sum() < 2:
        return math.inf
    slope = np.polyfit(rs[keep].astype(float), np.log(env[keep]), 1)[0]
    return float(-slope)


def decay_report(G: np.ndarray, interval: tuple, E: float,
                 thresholds: GreenThresholds | None = None) -> GreenReport:
    """Norm, off-diagonal decay fit and good/bad verdict for one Green's function.

    Far entries are those with |m - n| > N/10, N + 1 being the window size.
    The window is good when ||G|| < norm_cap and every far entry satisfies
    |G(m, n)| < e^{-rate_floor |m - n|}.
    """
    thresholds = GreenThresholds() if thresholds is None else thresholds
    n = G.shape[0]
    if G.shape != (n, n) or n < 10:
        raise InvalidArgument("need a square Green's function with at least 10 sites")
    N = n - 1
    dist = _distance_matrix(n)
    far = dist > N / 10
    mod = np.abs(G)
    op_norm = operator_norm(G)
    cap = thresholds.cap(N)
    far_ok = bool(np.all(mod[far] < np.exp(-thresholds.rate_floor * dist[far])))
    return GreenReport(
        interval=tuple(interval), E=float(E), op_norm=op_norm,
        decay_rate=envelope_decay_rate(mod, dist, far),
        max_far_entry=float(mod[far].max()),
        good=bool(op_norm < cap and far_ok),
        norm_cap=cap, rate_floor=thresholds.rate_floor)


def _good_at_scale(G: np.ndarray, scale_N: int, th: GreenThresholds) -> bool:
    n = G.shape[0]
    dist = _distance_matrix(n)
    far = dist > scale_N / 10
    if operator_norm(G) >= th.cap(scale_N):
        return False
    return bool(np.all(np.abs(G[far]) < np.exp(-th.rate_floor * dist[far])))


def classify_site(spec: OperatorSpec, x: TorusPoint, n0: int, M: int, E: float,
                  thresholds: GreenThresholds | None = None) -> bool:
    """True when n0 is a good site: the window [n0 - M/2, n0 + M/2] has a good
    Green's function at scale M.  A singular window is bad."""
    if M < 10 or M % 2:
        raise InvalidArgument("M must be even and >= 10")
    thresholds = GreenThresholds() if thresholds is None else thresholds
    w = assemble_window(spec, (n0 - M // 2, n0 + M // 2), E, x)
    try:
        G = green_function(w)
    except SingularWindow:
        return False
    return decay_report(G, w.interval, E, thresholds).good


def bad_sites(spec: OperatorSpec, x: TorusPoint, N: int, M: int, E: float,
              thresholds: GreenThresholds | None = None) -> list[int]:
    """All bad sites n0 in [0, N) at scale M.

    One window covering every [n0 - M/2, n0 + M/2] is assembled and sliced,
    which by translation covariance equals assembling each window separately.
    """
    if M < 10 or M % 2:
        raise InvalidArgument("M must be even and >= 10")
    thresholds = GreenThresholds() if thresholds is None else thresholds
    big = assemble_window(spec, (-(M // 2), N - 1 + M // 2), E, x)
    out = []
    for n0 in range(N):
        H = big.entries[n0:n0 + M + 1, n0:n0 + M + 1]
        try:
            G, _ = invert_window(H)
        except SingularWindow:
            out.append(n0)
            continue
        if not decay_report(G, (n0 - M // 2, n0 + M // 2), E, thresholds).good:
            out.append(n0)
    return out


def dyadic_violations(bad: Sequence[int], N: int, delta: float, min_length: float) -> list[tuple]:
    """Dyadic blocks J of [0, N) with |J| >= min_length and |J cap bad| >= |J|^(1-delta).

    Returns (start, length, count) for each offending block.
    """
    marks = np.zeros(N, dtype=int)
    marks[list(bad)] = 1
    out = []
    length = 1
    while length <= N:
        if length >= min_length:
            for start in range(0, N - length + 1, length):
                count = int(marks[start:start + length].sum())
                if not count < length ** (1 - delta):
                    out.append((start, length, count))
        length *= 2
    return out


def sample_points(d: int, samples: int, seed: int) -> list[TorusPoint]:
    """Uniform points on the torus; point i depends only on (seed, i)."""
    return [TorusPoint.from_floats(np.random.default_rng([seed, i]).random(d)) for i in range(samples)]


def good_flags(spec: OperatorSpec, energies: Sequence[float], N: int, samples: int, seed: int,
               thresholds: GreenThresholds | None = None, threads: int = 1) -> np.ndarray:
    """Boolean array (len(energies), samples): is G_[0,N](E, x_i) good?"""
    thresholds = GreenThresholds() if thresholds is None else thresholds
    pts = sample_points(spec.d, samples, seed)
    energies = [float(E) for E in energies]

    def one(x):
        base = assemble_window(spec, (0, N), 0.0, x)
        col = []
        for E in energies:
            try:
                G, _ = invert_window(base.entries - E * np.eye(N + 1))
            except SingularWindow:
                col.append(False)
                continue
            col.append(decay_report(G, (0, N), E, thresholds).good)
        return col

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            cols = list(pool.map(one, pts))
    else:
        cols = [one(x) for x in pts]
    return np.array(cols, dtype=bool).T.reshape(len(energies), samples)


def _estimate(N: int, E: float, good: np.ndarray) -> BadSetEstimate:
    samples = good.size
    bad = int(samples - good.sum())
    ci = binomtest(bad, samples).proportion_ci(0.95, method="wilson")
    return BadSetEstimate(N, float(E), samples, bad / samples, float(ci.high - ci.low) / 2)


def bad_set_sweep(spec: OperatorSpec, energies: Sequence[float], N: int, samples: int, seed: int,
                  thresholds: GreenThresholds | None = None, threads: int = 1) -> list[BadSetEstimate]:
    """:func:`bad_set_measure` for several energies on one shared sample of x."""
    if samples < 100:
        raise InvalidArgument("need at least 100 samples")
    flags = good_flags(spec, energies, N, samples, seed, thresholds, threads)
    return [_estimate(N, E, row) for E, row in zip(energies, flags)]


def bad_set_measure(spec: OperatorSpec, E: float, N: int, samples: int, seed: int,
                    thresholds: GreenThresholds | None = None) -> BadSetEstimate:
    """Monte-Carlo fraction of x for which G_[0,N](E, x) is bad, with a Wilson 95% half-width."""
    return bad_set_sweep(spec, [E], N, samples, seed, thresholds)[0]


# --- pasting ---------------------------------------------------------------

def paste_cover(N: int, M: int) -> list[tuple]:
    """Subintervals [s, s + M] of [0, N] with step M/2; the last one ends at N."""
    step = max(1, M // 2)
    out = []
    s = 0
    while True:
        if s + M >= N:
            out.append((max(0, N - M), N))
            break
        out.append((s, s + M))
        s += step
    return out


def paste_check_matrix(H: np.ndarray, M: int, c0: float, slack: float,
                       norm_exponent: float = 0.9) -> PasteResult:
    """Pasting check on an assembled window H = R_[0,N](H - E)R_[0,N]."""
    N = H.shape[0] - 1
    if not M <= N / 4:
        raise InvalidArgument(f"need M <= N/4 (M={M}, N={N})")
    sub_th = GreenThresholds(rate_floor=c0, norm_exponent=norm_exponent)
    hyp = True
    for a, b in paste_cover(N, M):
        try:
            G, _ = invert_window(H[a:b + 1, a:b + 1])
        except SingularWindow:
            hyp = False
            break
        if not _good_at_scale(G, M, sub_th):
            hyp = False
            break
    try:
        G, _ = invert_window(H)
    except SingularWindow:
        return PasteResult(hyp, False)
    dist = _distance_matrix(N + 1)
    far = dist > N / 10
    concl = bool(np.all(np.abs(G[far]) < np.exp(-(c0 - slack) * dist[far])))
    return PasteResult(hyp, concl)


def paste_check(spec: OperatorSpec, x: TorusPoint, E: float, N: int, M: int, c0: float = 0.01,
                slack: float = 0.005, norm_exponent: float = 0.9) -> PasteResult:
    """Check the pasting lemma on I = [0, N]: if every cover window I_a has
    ||G_{I_a}|| < e^{M^0.9} and far-entry decay at rate c0, test whether G_I
    decays at rate c0 - slack for |n1 - n2| > N/10."""
    if not M <= N / 4:
        raise InvalidArgument(f"need M <= N/4 (M={M}, N={N})")
    w = assemble_window(spec, (0, N), E, x)
    return paste_check_matrix(w.entries, M, c0, slack, norm_exponent)


def resolvent_identity_residual(H: np.ndarray, cut: int) -> float:
    """max |G - (G0 - G0 Gamma G)| for the split of H at ``cut``.

    G0 is the inverse of the block-diagonal part (two independent windows) and
    Gamma the coupling entries across the cut.
    """
    n = H.shape[0]
    if not 0 < cut < n:
        raise InvalidArgument("cut must split the window into two nonempty parts")
    H0 = np.zeros_like(H)
    H0[:cut, :cut] = H[:cut, :cut]
    H0[cut:, cut:] = H[cut:, cut:]
    gamma = H - H0
    G, _ = invert_window(H)
    G0 = np.zeros_like(H)
    G0[:cut, :cut], _ = invert_window(H[:cut, :cut])
    G0[cut:, cut:], _ = invert_window(H[cut:, cut:])
    return float(np.abs(G - (G0 - G0 @ gamma @ G)).max())


# --- eigensystems ----------------------------------------------------------

def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """n - 1 (n even) or n (n odd) rounds of disjoint index pairs covering all pairs once."""
    m = n + (n % 2)
    ring = list(range(m))
    rounds = []
    for _ in range(m - 1):
        P, Q = [], []
        for i in range(m // 2):
            a, b = ring[i], ring[m - 1 - i]
            if a < n and b < n:
                P.append(min(a, b))
                Q.append(max(a, b))
        rounds.append((np.array(P, dtype=int), np.array(Q, dtype=int)))
        ring = [ring[0], ring[-1]] + ring[1:-1]
    return rounds


def jacobi_eigh(H: np.ndarray, max_sweeps: int = 60) -> EigenSystem:
    """Hermitian eigendecomposition by cyclic Jacobi rotations in parallel order.

    Each round applies n/2 disjoint complex rotations at once.  Jacobi keeps
    small eigenvector components accurate relative to their own size, which
    matters for measuring exponential tails far below machine epsilon; a
    Householder/QR solver smears them at the 1e-16 level.
    """
    A = np.array(H, dtype=complex)
    n = A.shape[0]
    if A.shape != (n, n):
        raise InvalidArgument("matrix must be square")
    V = np.eye(n, dtype=complex)
    scale = float(np.abs(A).max()) or 1.0
    floor = TINY * scale
    rounds = _round_robin(n)
    for _ in range(max_sweeps):
        off = np.abs(A - np.diag(np.diag(A)))
        if off.max() <= floor:
            break
        for P, Q in rounds:
            if P.size == 0:
                continue
            b = A[P, Q]
            ab = np.abs(b)
            act = ab > floor
            if not act.any():
                continue
            P, Q, b, ab = P[act], Q[act], b[act], ab[act]
            app = A[P, P].real
            aqq = A[Q, Q].real
            with np.errstate(over="ignore"):
                tau = (aqq - app) / (2.0 * ab)
                t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            ph = b / ab
            sp, sm = s * ph, s * ph.conj()
            AP = A[:, P].copy()
            AQ = A[:, Q]
            A[:, P] = c * AP - sm * AQ
            A[:, Q] = sp * AP + c * AQ
            AP = A[P, :].copy()
            AQ = A[Q, :]
            A[P, :] = c[:, None] * AP - sp[:, None] * AQ
            A[Q, :] = sm[:, None] * AP + c[:, None] * AQ
            A[P, Q] = 0.0
            A[Q, P] = 0.0
            A[P, P] = app - t * ab
            A[Q, Q] = aqq + t * ab
            VP = V[:, P].copy()
            VQ = V[:, Q]
            V[:, P] = c * VP - sm * VQ
            V[:, Q] = sp * VP + c * VQ
    else:
        raise NumericalError(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = np.diag(A).real
    order = np.argsort(w, kind="stable")
    return EigenSystem(w[order], V[:, order])


def eigensystem(w: WindowMatrix) -> EigenSystem:
    """Eigenvalues (ascending) and unit eigenvectors of an E = 0 window."""
    if w.size > MAX_EIGEN_WINDOW:
        raise ResourceLimit(f"eigensystem limited to {MAX_EIGEN_WINDOW} sites, got {w.size}")
    if w.energy != 0.0:
        raise InvalidArgument("eigensystem expects a window assembled at E = 0")
    es = jacobi_eigh(w.entries)
    H = w.entries
    resid = np.linalg.norm(H @ es.vectors - es.vectors * es.values, axis=0)
    hnorm = np.linalg.norm(H, 2) if w.size else 0.0
    if resid.size and resid.max() >= 1e-8 * max(hnorm, 1e-300):
        raise NumericalError(f"eigenpair residual {resid.max():.3g} exceeds 1e-8 ||H||")
    return es


def localization_record(value: float, vec: np.ndarray, first_site: int, N: int) -> LocalizationRecord:
    mod = np.abs(vec)
    i0 = int(mod.argmax())
    r = np.abs(np.arange(mod.size) - i0)
    mask = (r >= N / 8) & (r <= 3 * N / 8) & (mod >= TINY)
    if mask.sum() < 2:
        rate = math.inf
    else:
        rate = float(-np.polyfit(r[mask].astype(float), np.log(mod[mask]), 1)[0])
    p2 = float(np.sum(mod**2))
    p4 = float(np.sum(mod**4))
    return LocalizationRecord(float(value), first_site + i0, rate, p2 * p2 / p4)


def localization_table(spec: OperatorSpec, N: int) -> list[LocalizationRecord]:
    """One record per eigenvector of H on [-N/2, N/2] at the spec's base point."""
    if N > MAX_EIGEN_WINDOW:
        raise ResourceLimit(f"N={N} exceeds {MAX_EIGEN_WINDOW}")
    a = -(N // 2)
    w = assemble_window(spec, (a, a + N), 0.0)
    es = eigensystem(w)
    return [localization_record(es.values[i], es.vectors[:, i], a, N) for i in range(w.size)]


def resonance_distance(spec: OperatorSpec, E: float, N1: int) -> ResonanceDistance:
    """min over 1 <= j <= N1 of dist(E, spec H_[-j, j](x0)); eigenvalues only."""
    if N1 < 1:
        raise InvalidArgument("N1 must be >= 1")
    if N1 > 512:
        raise ResourceLimit(f"N1={N1} exceeds 512")
    big = assemble_window(spec, (-N1, N1), 0.0).entries
    best, best_j = math.inf, 1
    for j in range(1, N1 + 1):
        sub = big[N1 - j:N1 + j + 1, N1 - j:N1 + j + 1]
        dist = float(np.abs(la.eigvalsh(sub) - E).min())
        if dist < best:
            best, best_j = dist, j
    return ResonanceDistance(best, best_j)


def observed_energy_grid(spec: OperatorSpec, points: int = 16, N: int = 256) -> list[float]:
    """``points`` energies spread across the spectrum of H on [-N/2, N/2] at x0.

    Energy i is the ((i + 1/2)/points)-quantile of the window eigenvalues, so
    the grid follows the density of states rather than a uniform spacing.
    """
    if points < 1:
        raise InvalidArgument("points must be >= 1")
    a = -(N // 2)
    ev = la.eigvalsh(assemble_window(spec, (a, a + N), 0.0).entries)
    return [float(e) for e in np.quantile(ev, (np.arange(points) + 0.5) / points)]
