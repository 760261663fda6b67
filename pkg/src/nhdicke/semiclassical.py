"""Three-mode semiclassical Dicke model with balanced gain and loss.

Mode order is (atom 1, photon, atom 2). Atom 1 carries gain ``+i*gamma``,
atom 2 the matching loss, and ``kappa`` sets the energy unit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import gcd

import mpmath
import numpy as np
from scipy.optimize import brentq

from .linalg import (
    EigenSystem,
    Polynomial,
    TrackedSweep,
    eig_full,
    geometric_multiplicity,
    poly_roots,
    track_bands,
)

SQRT2 = np.sqrt(2.0)
BOUNDARY_TOL = 1e-9
COALESCE_TOL = 1e-6
MIN_LOOP_CLEARANCE = 1e-3


@dataclass(frozen=True)
class SemiclassicalParams:
    delta: float
    gamma: float
    t: float
    kappa: float = 1.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    def with_(self, **changes) -> "SemiclassicalParams":
        return replace(self, **changes)


def dicke_matrix(delta, gamma, t, kappa=1.0, gamma2=None) -> np.ndarray:
    """Dicke matrix for possibly complex ``delta``.

    ``gamma2`` overrides the imaginary part on atom 2 (default ``-gamma``).
    """
    g2 = -gamma if gamma2 is None else gamma2
    s = kappa / SQRT2
    return np.array(
        [
            [delta + 1j * gamma, s, t],
            [s, 0.0, s],
            [t, s, delta + 1j * g2],
        ],
        dtype=complex,
    )


def build_dicke(p: SemiclassicalParams) -> np.ndarray:
    return dicke_matrix(p.delta, p.gamma, p.t, p.kappa)


def characteristic_polynomial(delta, gamma, t, kappa=1.0, gamma2=None) -> Polynomial:
    """det(w*I - H) as an ascending-order polynomial in w."""
    g2 = -gamma if gamma2 is None else gamma2
    a = delta + 1j * gamma
    c = delta + 1j * g2
    k2 = kappa * kappa
    c0 = -(-a * k2 / 2 - c * k2 / 2 + t * k2)
    c1 = a * c - t * t - k2
    c2 = -(a + c)
    return Polynomial([c0, c1, c2, 1.0])


def discriminant(delta, gamma, t, kappa=1.0) -> complex:
    """Discriminant of the characteristic cubic; zero at any coalescence."""
    c0, c1, c2, _ = characteristic_polynomial(delta, gamma, t, kappa).coefficients
    b, c, d = c2, c1, c0
    return 18 * b * c * d - 4 * b ** 3 * d + b * b * c * c - 4 * c ** 3 - 27 * d * d


# ---------------------------------------------------------------------------
# Exceptional-point loci

def ep2_locus(omega, t, kappa=1.0):
    """Parameters (delta, gamma, omega3) with a double eigenvalue at ``omega``.

    ``omega3`` is the remaining simple eigenvalue.
    """
    omega = np.asarray(omega, dtype=float)
    k2 = kappa * kappa
    den = k2 + 2 * omega ** 2
    delta = (t * k2 + 2 * omega ** 3) / den
    gamma = np.sqrt(k2 + omega ** 2) * (k2 + 2 * t * omega) / den
    omega3 = 2 * (t - omega) * k2 / den
    return delta, gamma, omega3


def ep3_locus(omega, kappa=1.0):
    """Parameters (delta, gamma, t) with a triple eigenvalue at ``omega``."""
    omega = np.asarray(omega, dtype=float)
    k2 = kappa * kappa
    delta = 1.5 * omega
    gamma = (omega ** 2 + k2) ** 1.5 / k2
    t = 1.5 * omega + omega ** 3 / k2
    return delta, gamma, t


def locus_eigenvalues(omega: float, t: float | None = None, kappa: float = 1.0, dps: int = 24) -> np.ndarray:
    """Eigenvalues on the EP2 locus (given ``t``) or the EP3 locus (``t=None``) in extended precision.

    Locus parameters and eigenvalues are both evaluated with ``dps`` digits,
    because in double precision an n-fold root splits by about eps**(1/n).
    """
    with mpmath.workdps(dps):
        w = mpmath.mpf(omega)
        k2 = mpmath.mpf(kappa) ** 2
        if t is None:
            delta = 1.5 * w
            gamma = (w * w + k2) ** mpmath.mpf(1.5) / k2
            tt = 1.5 * w + w ** 3 / k2
        else:
            tt = mpmath.mpf(t)
            den = k2 + 2 * w * w
            delta = (tt * k2 + 2 * w ** 3) / den
            gamma = mpmath.sqrt(k2 + w * w) * (k2 + 2 * tt * w) / den
        s = mpmath.sqrt(k2 / 2)
        m = mpmath.matrix([[delta + 1j * gamma, s, tt], [s, 0, s], [tt, s, delta - 1j * gamma]])
        ev = mpmath.eig(m, left=False, right=False)
        return np.array([complex(x) for x in ev])


def ep3_spread(omega: float, kappa: float = 1.0, dps: int = 24) -> float:
    """Eigenvalue spread max|l_i - l_j| on the third-order locus."""
    ev = locus_eigenvalues(omega, None, kappa, dps)
    return float(np.max(np.abs(ev[:, None] - ev[None, :])))


def ep3_gain_product(omega, kappa=1.0):
    """Product gamma1*gamma2 required for a triple root with unequal rates.

    Always negative, so a third-order point needs gain on one atom and loss on
    the other.
    """
    return -((omega ** 2 + kappa ** 2) ** 3) / kappa ** 4


def ep3_omega(t: float, kappa: float = 1.0) -> float:
    """Real root of t = 1.5*w + w**3/kappa**2 (monotone, hence unique)."""
    roots = poly_roots([-t, 1.5, 0.0, 1.0 / kappa ** 2])
    return float(roots[np.argmin(np.abs(roots.imag))].real)


def gamma_ep3(t: float, kappa: float = 1.0) -> float:
    w = ep3_omega(t, kappa)
    return float((w * w + kappa * kappa) ** 1.5 / kappa ** 2)


PHASE_LABELS = ("I", "II", "III", "EP3-line", "EP2-line", "Hermitian")


@dataclass(frozen=True)
class PhaseClass:
    label: str

    def __post_init__(self):
        if self.label not in PHASE_LABELS:
            raise ValueError(f"unknown phase label {self.label!r}")

    def __str__(self):
        return self.label


def classify_point(gamma_over_kappa: float, t_over_kappa: float, tol: float = BOUNDARY_TOL) -> PhaseClass:
    """Region of the (gamma, t) plane, in units of kappa."""
    g, t = float(gamma_over_kappa), float(t_over_kappa)
    if g < -tol:
        raise ValueError("gamma must be non-negative")
    if abs(g) <= tol:
        return PhaseClass("Hermitian")
    g3 = gamma_ep3(t)
    if abs(g - g3) <= tol:
        return PhaseClass("EP3-line")
    if abs(g - t) <= tol:
        return PhaseClass("EP2-line")
    if g < t:
        return PhaseClass("I")
    if g < g3:
        return PhaseClass("II")
    return PhaseClass("III")


@dataclass(frozen=True)
class EpPoint:
    order: int
    frequency: complex
    location: SemiclassicalParams
    spectator: complex | None = None
    chirality: int | None = None

    def __post_init__(self):
        if self.order not in (2, 3):
            raise ValueError("order must be 2 or 3")


def ep3_point(t: float, kappa: float = 1.0) -> EpPoint:
    w = ep3_omega(t, kappa)
    delta, gamma, _ = ep3_locus(w, kappa)
    return EpPoint(3, complex(w), SemiclassicalParams(float(delta), float(gamma), t, kappa))


def ep2_points(gamma: float, t: float, kappa: float = 1.0, omega_span: float = 60.0) -> list[EpPoint]:
    """Second-order points on the real detuning axis at fixed (gamma, t).

    The locus is scanned for |gamma(omega)| = gamma; the parity swap of the two
    atoms maps gamma to -gamma without changing the spectrum.
    """
    grid = np.linspace(-omega_span, omega_span, 24001)
    f = np.abs(ep2_locus(grid, t, kappa)[1]) - abs(gamma)
    out = []
    for i in np.flatnonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0):
        w = brentq(lambda x: abs(float(ep2_locus(x, t, kappa)[1])) - abs(gamma),
                   grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15)
        d, _, w3 = ep2_locus(w, t, kappa)
        if abs(w3 - w) < 1e-6 * kappa:
            continue
        out.append(EpPoint(2, complex(w), SemiclassicalParams(float(d), gamma, t, kappa), complex(w3)))
    return sorted(out, key=lambda e: e.location.delta)


def coalescence(m, order: int, tol: float = COALESCE_TOL) -> bool:
    """True when ``order`` eigenvalues lie within ``tol`` and the matrix is defective there."""
    es = eig_full(m)
    v = es.values
    for i in range(len(v)):
        near = np.flatnonzero(np.abs(v - v[i]) < tol)
        if len(near) >= order:
            centre = v[near].mean()
            return geometric_multiplicity(m, centre) < len(near)
    return False


# ---------------------------------------------------------------------------
# Phase rigidity and scaling

def phase_rigidity(es: EigenSystem, j: int) -> float:
    """|<L_j|R_j>| / (||L_j|| ||R_j||), with the left row used as the bra.

    At an exact coalescence the value collapses to rounding level and
    ``es.defective[j]`` reports the coalescence.
    """
    u = es.left[j]
    v = es.right[:, j]
    den = np.linalg.norm(u) * np.linalg.norm(v)
    return float(min(abs(u @ v) / den, 1.0))


def rigidities(es: EigenSystem) -> np.ndarray:
    return np.array([phase_rigidity(es, j) for j in range(es.dim)])


PERTURBABLE = ("delta", "gamma", "t", "kappa")


def _nearest_states(es: EigenSystem, frequency: complex, count: int) -> np.ndarray:
    return np.argsort(np.abs(es.values - frequency))[:count]


def rigidity_curve(ep: EpPoint, perturbed_parameter: str, epsilons) -> np.ndarray:
    """Mean rigidity of the coalescing states at ``location + eps``."""
    if perturbed_parameter not in PERTURBABLE:
        raise ValueError(f"parameter must be one of {PERTURBABLE}")
    out = []
    for eps in np.asarray(epsilons, dtype=float):
        base = getattr(ep.location, perturbed_parameter)
        p = ep.location.with_(**{perturbed_parameter: base + eps})
        es = eig_full(build_dicke(p))
        idx = _nearest_states(es, ep.frequency, ep.order)
        out.append(np.mean([phase_rigidity(es, j) for j in idx]))
    return np.array(out)


def loglog_slope(x, y) -> float:
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def _monotone(y, rel: float = 1e-9) -> bool:
    d = np.diff(y)
    tol = rel * np.max(np.abs(y))
    return bool(np.all(d >= -tol) or np.all(d <= tol))


def fit_scaling_exponent(ep: EpPoint, perturbed_parameter: str, epsilons) -> float:
    """Least-squares slope of log(rigidity) against log(eps)."""
    eps = np.asarray(epsilons, dtype=float)
    if np.any(eps <= 0):
        raise ValueError("epsilons must be positive")
    r = rigidity_curve(ep, perturbed_parameter, eps)
    order = np.argsort(eps)
    if not _monotone(r[order]):
        raise ValueError("rigidity is not monotone over the grid; refine it or check the EP")
    return loglog_slope(eps, r)


# ---------------------------------------------------------------------------
# Encircling

@dataclass(frozen=True)
class LoopPath:
    center: complex
    radius: float
    steps: int = 400
    ccw: bool = True

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.steps < 64:
            raise ValueError("a loop needs at least 64 steps")

    def points(self, loops: int = 1) -> np.ndarray:
        sign = 1.0 if self.ccw else -1.0
        theta = np.linspace(0.0, 2 * np.pi * loops, self.steps * loops + 1)
        pts = self.center + self.radius * np.exp(sign * 1j * theta)
        pts[-1] = pts[0]
        return pts

    def mirrored(self) -> "LoopPath":
        return replace(self, ccw=not self.ccw)


@dataclass(frozen=True)
class EncircleResult:
    permutation: tuple
    label: str
    phases: np.ndarray
    loops: int
    closure_loops: int
    closure_phases: np.ndarray
    trajectory: np.ndarray = field(repr=False)

    @property
    def phase_per_loop(self) -> np.ndarray:
        return self.phases / self.loops


def _loop_sweep(loop: LoopPath, base: SemiclassicalParams, loops: int) -> TrackedSweep:
    systems = [eig_full(dicke_matrix(d, base.gamma, base.t, base.kappa)) for d in loop.points(loops)]
    return track_bands(systems, strict=True)


def _wilson_phases(systems) -> np.ndarray:
    """Accumulated -arg <L_i|R_{i+1}> per tracked state, gauge tied to the start vector."""
    n = systems[0].dim
    phases = np.zeros(n)
    for j in range(n):
        ref = systems[0].right[:, j]
        v = systems[0].right[:, j] / (ref.conj() @ systems[0].right[:, j])
        total = 0.0
        for i in range(len(systems) - 1):
            u = systems[i].left[j]
            u = u / (u @ v)
            w = systems[i + 1].right[:, j]
            w = w / (ref.conj() @ w)
            total -= np.angle(u @ w)
            v = w
        phases[j] = total
    return phases


def _end_permutation(tracked: TrackedSweep) -> tuple:
    start = tracked.systems[0].values
    end = tracked.systems[-1].values
    perm = tuple(int(np.argmin(np.abs(start - x))) for x in end)
    if len(set(perm)) != len(perm):
        raise RuntimeError("loop end does not map onto the start spectrum")
    return perm


def permutation_label(perm) -> str:
    """Labels occupying positions 1..n after the loop, e.g. '312'."""
    pos = [0] * len(perm)
    for j, p in enumerate(perm):
        pos[p] = j + 1
    return "".join(str(x) for x in pos)


def compose(perm, times: int) -> tuple:
    out = tuple(range(len(perm)))
    for _ in range(times):
        out = tuple(perm[i] for i in out)
    return out


def permutation_order(perm) -> int:
    seen = set()
    order = 1
    for s in range(len(perm)):
        if s in seen:
            continue
        length = 0
        j = s
        while j not in seen:
            seen.add(j)
            j = perm[j]
            length += 1
        order = order * length // gcd(order, length)
    return order


def _check_loop(ep: EpPoint, loop: LoopPath):
    d0 = ep.location.delta
    clearance = abs(abs(loop.center - d0) - loop.radius)
    if clearance < MIN_LOOP_CLEARANCE:
        raise ValueError("loop passes within 1e-3 of the exceptional point")


def encircle(ep: EpPoint, loop: LoopPath, base: SemiclassicalParams, loops: int = 1) -> EncircleResult:
    """Permutation and geometric phases from transporting eigenstates around a loop.

    The loop runs in the complex detuning plane with the other parameters of
    ``base`` fixed. Phases are the discrete biorthogonal Wilson line of each
    tracked state; ``closure_phases`` continue until every state is back at its
    starting label, which makes them gauge invariant.
    """
    _check_loop(ep, loop)
    tracked = _loop_sweep(loop, base, loops)
    perm = _end_permutation(tracked)
    one = perm
    if loops > 1:
        one = _end_permutation(_loop_sweep(loop, base, 1))
    closure = permutation_order(one)
    if closure == loops:
        closure_phases = _wilson_phases(tracked.systems)
    else:
        closure_phases = _wilson_phases(_loop_sweep(loop, base, closure).systems)
    return EncircleResult(
        permutation=perm,
        label=permutation_label(perm),
        phases=_wilson_phases(tracked.systems),
        loops=loops,
        closure_loops=closure,
        closure_phases=closure_phases,
        trajectory=tracked.values,
    )


def coalesced_vector(ep: EpPoint) -> np.ndarray:
    """Right null vector of H - w_EP at the exceptional point."""
    m = build_dicke(ep.location) - ep.frequency * np.eye(3)
    _, _, vh = np.linalg.svd(m)
    return vh[-1].conj()


def ep_chirality(ep: EpPoint, loop: LoopPath, base: SemiclassicalParams | None = None) -> int:
    """Handedness of a second-order point as seen along an oriented loop.

    The two coalescing eigenvalues swap around the loop, so arg(l_a - l_b)
    winds by +-1/2; its sign fixes the orientation. The handedness is the
    sign of (Re v x Im v).(1, 0, 1) for the coalesced eigenvector v, i.e. the
    rotation sense of the state in the atom subspace. Chirality is their
    product.
    """
    if ep.order != 2:
        raise ValueError("chirality is defined for second-order points")
    base = ep.location if base is None else base
    _check_loop(ep, loop)
    tracked = _loop_sweep(loop, base, 1)
    idx = _nearest_states(tracked.systems[0], ep.frequency, 2)
    vals = tracked.values
    diff = vals[:, idx[0]] - vals[:, idx[1]]
    winding = np.sum(np.angle(diff[1:] / diff[:-1])) / (2 * np.pi)
    if abs(winding) < 0.25:
        raise ValueError("eigenvalue difference does not wind; the loop misses the EP")
    v = coalesced_vector(ep)
    n = np.cross(v.real, v.imag)
    hand = n @ np.array([1.0, 0.0, 1.0])
    if abs(hand) < 1e-12:
        raise ValueError("coalesced eigenvector has no handedness")
    return int(np.sign(winding) * np.sign(hand))


# ---------------------------------------------------------------------------
# Spectral sweeps

@dataclass(frozen=True)
class SpectrumSweep:
    delta: np.ndarray
    values: np.ndarray
    photonic: np.ndarray
    flagged: list


def spectrum_sweep(base: SemiclassicalParams, delta_grid, strict: bool = False) -> SpectrumSweep:
    """Tracked eigenvalues and photonic weight |R_photon|^2 along a detuning grid.

    On a real grid that passes close to an exceptional point the continuation
    is intrinsically ambiguous there; such steps are listed in ``flagged``
    unless ``strict`` asks for an error instead.
    """
    grid = np.asarray(delta_grid, dtype=float)
    d = np.diff(grid)
    if len(grid) > 1 and not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("delta grid must be strictly monotone")
    systems = [eig_full(build_dicke(base.with_(delta=float(x)))) for x in grid]
    tracked = track_bands(systems, strict=strict)
    photonic = np.array([np.abs(es.right[1]) ** 2 for es in tracked.systems])
    return SpectrumSweep(grid, tracked.values, photonic, tracked.flagged)
