"""One-dimensional chain of three-mode cells coupled atom 2 -> atom 1.

Bulk bands come from the Bloch matrix on a uniform k grid over [-pi, pi);
topology is read from the biorthogonal Zak phase of the bands below each
gap, and edge states from the open chain of ``n_cells`` cells.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .linalg import eig_full, track_bands
from .semiclassical import SemiclassicalParams, dicke_matrix

REAL_TOL = 1e-8
GAP_TOL = 1e-6
SNAP_TOL = 1e-3
SNAP_FAIL = 1e-2
EDGE_FRACTION = 0.1
EDGE_WEIGHT = 0.6
OFF_AXIS_TOL = 1e-6


@dataclass(frozen=True)
class ChainParams:
    delta: float
    gamma: float
    t: float
    kappa: float = 1.0
    lam: float = 0.0
    n_cells: int = 40

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.n_cells < 1:
            raise ValueError("n_cells must be positive")

    def with_(self, **changes) -> "ChainParams":
        return replace(self, **changes)

    @property
    def cell(self) -> SemiclassicalParams:
        return SemiclassicalParams(self.delta, self.gamma, self.t, self.kappa)


def bloch_hamiltonian(k: float, p: ChainParams) -> np.ndarray:
    h = dicke_matrix(p.delta, p.gamma, p.t, p.kappa)
    h[0, 2] = p.t + p.lam * np.exp(-1j * k)
    h[2, 0] = p.t + p.lam * np.exp(1j * k)
    return h


def pt_critical_residual(k: float, p: ChainParams) -> float:
    """Criticality polynomial in (P(k), Q(k)); it vanishes where PT symmetry breaks.

    P = delta^2 + gamma^2 - kappa^2 - (t^2 + lam^2 + 2 t lam cos k) and
    Q = delta - t - lam cos k. The residual is proportional to the
    discriminant of the Bloch characteristic polynomial.
    """
    d, k2 = p.delta, p.kappa ** 2
    c = np.cos(k)
    P = d * d + p.gamma ** 2 - k2 - (p.t ** 2 + p.lam ** 2 + 2 * p.t * p.lam * c)
    Q = d - p.t - p.lam * c
    return float((d * P + 4.5 * k2 * Q) ** 2 - (4 * d * d - 3 * P) * (P * P + 6 * k2 * d * Q))


def k_grid(k_steps: int) -> np.ndarray:
    return -np.pi + 2 * np.pi * np.arange(k_steps) / k_steps


@dataclass(frozen=True)
class BandStructure:
    k_grid: np.ndarray
    bands: np.ndarray
    gap_open: tuple
    real: bool
    systems: list

    def gap_interval(self, gap: int) -> tuple[float, float]:
        """Global real-energy window (max of band below, min of band above)."""
        lo = self.bands[:, gap - 1].real.max()
        hi = self.bands[:, gap].real.min()
        return float(lo), float(hi)


def band_structure(p: ChainParams, k_steps: int = 256) -> BandStructure:
    ks = k_grid(k_steps)
    systems = [eig_full(bloch_hamiltonian(k, p)) for k in ks]
    raw = np.array([es.values for es in systems])
    real = bool(np.max(np.abs(raw.imag)) <= REAL_TOL)
    if real:
        tracked = systems
    else:
        tracked = track_bands(systems, strict=False).systems
    bands = np.array([es.values for es in tracked])
    gaps = []
    for g in (1, 2):
        sep = np.min(raw[:, g].real - raw[:, g - 1].real)
        gaps.append(bool(real and sep > GAP_TOL))
    return BandStructure(ks, bands, tuple(gaps), real, systems)


# ---------------------------------------------------------------------------
# Zak phase

@dataclass(frozen=True)
class ZakComponents:
    """i * log of the closed Wilson loop for each bra/ket pairing."""

    lr: complex
    rl: complex
    ll: complex
    rr: complex

    @property
    def symmetric(self) -> float:
        return float(0.5 * (self.lr + self.rl).real)


def _unit_rows(a):
    return a / np.linalg.norm(a, axis=-1, keepdims=True)


def wilson_components(systems, band_set) -> ZakComponents:
    """Discrete Wilson loops over the k grid with periodic closure."""
    n = len(systems)
    acc = {"lr": 0j, "rl": 0j, "ll": 0j, "rr": 0j}
    for b in band_set:
        R = np.array([es.right[:, b] for es in systems])
        L = np.array([es.left[b] for es in systems])
        L = L / np.einsum("ij,ij->i", L, R)[:, None]
        Rn = _unit_rows(R)
        Ln = _unit_rows(L)
        nxt = np.roll(np.arange(n), -1)
        loops = {
            "lr": np.einsum("ij,ij->i", L, R[nxt]),
            "rl": np.einsum("ij,ij->i", R.conj(), L[nxt].conj()),
            "ll": np.einsum("ij,ij->i", Ln, Ln[nxt].conj()),
            "rr": np.einsum("ij,ij->i", Rn.conj(), Rn[nxt]),
        }
        for key, links in loops.items():
            acc[key] += 1j * np.sum(np.log(links))
    return ZakComponents(**acc)


def snap_phase(value: float) -> float:
    """Reduce mod 2pi and snap to 0 or pi."""
    v = float(np.mod(value, 2 * np.pi))
    d0 = min(v, 2 * np.pi - v)
    dpi = abs(v - np.pi)
    d = min(d0, dpi)
    if d > SNAP_FAIL:
        raise ValueError(f"Zak phase {v:.6f} is {d:.2e} from 0 and pi; refine the grid or check the gap")
    return 0.0 if d0 <= dpi else float(np.pi)


def zak_phase(p: ChainParams, band_set, k_steps: int = 256, bands: BandStructure | None = None) -> float:
    """Quantised biorthogonal Zak phase summed over ``band_set`` (0-based, by real part).

    The real part of the left-right Wilson loop equals the symmetric
    combination of the left-right and right-left components.
    """
    band_set = sorted(band_set)
    bs = bands if bands is not None else band_structure(p, k_steps)
    top = max(band_set)
    if top >= 2:
        raise ValueError("no gap above the top band")
    if not bs.gap_open[top]:
        raise ValueError(f"gap above band {top + 1} is closed on the grid")
    comps = wilson_components(bs.systems, band_set)
    return snap_phase(comps.lr.real)


TOPO_LABELS = ("NHTI", "NHNI", "NHSM")


@dataclass(frozen=True)
class TopoPhase:
    label: str
    zak_gap1: float | None
    zak_gap2: float | None
    gap: int = 1

    def __post_init__(self):
        if self.label not in TOPO_LABELS:
            raise ValueError(f"unknown label {self.label!r}")


def classify_chain(p: ChainParams, k_steps: int = 256, gap: int = 1) -> TopoPhase:
    """Phase for the chosen gap; Zak values are None where the gap is closed."""
    if k_steps < 128:
        raise ValueError("k_steps must be at least 128")
    if gap not in (1, 2):
        raise ValueError("gap must be 1 or 2")
    bs = band_structure(p, k_steps)
    zaks = []
    for g in (1, 2):
        zaks.append(zak_phase(p, range(g), bands=bs) if bs.gap_open[g - 1] else None)
    z = zaks[gap - 1]
    if z is None:
        label = "NHSM"
    else:
        label = "NHTI" if z > 0 else "NHNI"
    return TopoPhase(label, zaks[0], zaks[1], gap)


# ---------------------------------------------------------------------------
# Open chain

def open_chain(p: ChainParams) -> np.ndarray:
    n = p.n_cells
    h = np.zeros((3 * n, 3 * n), dtype=complex)
    cell = dicke_matrix(p.delta, p.gamma, p.t, p.kappa)
    for c in range(n):
        h[3 * c:3 * c + 3, 3 * c:3 * c + 3] = cell
        if c + 1 < n:
            h[3 * c + 2, 3 * c + 3] = p.lam
            h[3 * c + 3, 3 * c + 2] = p.lam
    return h


@dataclass(frozen=True)
class EdgeState:
    value: complex
    gap: int
    ipr: float
    edge_weight: float
    side: str


@dataclass(frozen=True)
class OpenSpectrum:
    values: np.ndarray
    ipr: np.ndarray
    edge_weight: np.ndarray
    left_weight: np.ndarray
    edges: list

    def count(self, gap: int) -> int:
        return sum(1 for e in self.edges if e.gap == gap)


def localization(vectors: np.ndarray, n_cells: int):
    """IPR, weight in the outer cells, and weight in the left outer cells."""
    v = vectors / np.linalg.norm(vectors, axis=0)
    prob = np.abs(v) ** 2
    ipr = np.sum(prob ** 2, axis=0)
    cells = prob.reshape(n_cells, 3, -1).sum(axis=1)
    m = max(int(np.ceil(EDGE_FRACTION * n_cells)), 1)
    left = cells[:m].sum(axis=0)
    right = cells[-m:].sum(axis=0)
    return ipr, left + right, left


def _nearest_gap(x: float, intervals: dict) -> int:
    def dist(g):
        lo, hi = intervals[g]
        return 0.0 if lo < x < hi else min(abs(x - lo), abs(x - hi))
    return min(intervals, key=dist)


def open_spectrum(p: ChainParams, k_steps: int = 256) -> OpenSpectrum:
    """Open-chain spectrum with localisation data and the edge states found.

    A localised state is a midgap edge state when its real part lies in an
    open gap, or when it has left the real axis (the open-gap bulk spectrum
    is real) in which case it is assigned to the gap nearest its real part.
    """
    if p.n_cells < 2:
        raise ValueError("an open chain needs at least two cells")
    es = eig_full(open_chain(p))
    ipr, edge, left = localization(es.right, p.n_cells)
    bs = band_structure(p, k_steps)
    intervals = {g: bs.gap_interval(g) for g in (1, 2) if bs.gap_open[g - 1]}
    edges = []
    if intervals:
        for i, v in enumerate(es.values):
            if not (ipr[i] > 4.0 / p.n_cells and edge[i] > EDGE_WEIGHT):
                continue
            g = _nearest_gap(v.real, intervals)
            lo, hi = intervals[g]
            if not (lo < v.real < hi or abs(v.imag) > OFF_AXIS_TOL):
                continue
            side = "left" if left[i] > 0.5 * edge[i] else "right"
            if 0.25 * edge[i] < left[i] < 0.75 * edge[i]:
                side = "both"
            edges.append(EdgeState(complex(v), g, float(ipr[i]), float(edge[i]), side))
    return OpenSpectrum(es.values, ipr, edge, left, edges)


def edge_states(p: ChainParams, k_steps: int = 256) -> list[EdgeState]:
    """Midgap states of the open chain that are localised at its ends."""
    return open_spectrum(p, k_steps).edges
