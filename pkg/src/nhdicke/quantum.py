"""Two qubits coupled to one truncated photon mode.

Basis states are |s1, s2, n> with s in (up, down) and n = 0..n_max, ordered
as kron(qubit 1, qubit 2, Fock). Superoperators act on column-stacked
density matrices, vec(rho)[i + d*j] = rho[i, j].
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .linalg import eig_full, null_space

SQRT2 = np.sqrt(2.0)
UP, DOWN = 0, 1
SPIN_NAMES = ("up", "down")
NULL_TOL = 1e-10


@dataclass(frozen=True)
class QuantumParams:
    omega1: float = 0.0
    omega2: float = 0.0
    omega_p: float = 0.0
    kappa1: float = 1.0
    kappa2: float = 1.0
    t: float = 0.0
    gamma1: float = 1.0
    gamma2: float = 0.3
    eta: float = 0.01
    omega_d: float = 0.0
    n_max: int = 6

    def __post_init__(self):
        if self.n_max < 2:
            raise ValueError("n_max must be at least 2")
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ValueError("dissipation rates must be non-negative")

    def with_(self, **changes) -> "QuantumParams":
        return replace(self, **changes)

    @property
    def dim(self) -> int:
        return 4 * (self.n_max + 1)

    @classmethod
    def resonant(cls, delta: float, kappa: float, **kw) -> "QuantumParams":
        """Both qubits detuned by ``delta`` from the photon, drive on the photon."""
        return cls(omega1=delta, omega2=delta, omega_p=0.0, kappa1=kappa, kappa2=kappa, omega_d=0.0, **kw)


@dataclass(frozen=True)
class BasisLabel:
    sigma1: str
    sigma2: str
    n: int

    def index(self, n_max: int) -> int:
        return basis_index(SPIN_NAMES.index(self.sigma1), SPIN_NAMES.index(self.sigma2), self.n, n_max)


def basis_index(s1: int, s2: int, n: int, n_max: int) -> int:
    if not 0 <= n <= n_max:
        raise ValueError("photon number outside the truncated space")
    return (2 * s1 + s2) * (n_max + 1) + n


def basis_labels(n_max: int) -> list[BasisLabel]:
    return [BasisLabel(SPIN_NAMES[s1], SPIN_NAMES[s2], n)
            for s1 in (UP, DOWN) for s2 in (UP, DOWN) for n in range(n_max + 1)]


@dataclass(frozen=True)
class Operators:
    sm1: np.ndarray
    sm2: np.ndarray
    a: np.ndarray

    @property
    def sz1(self):
        return 0.5 * (self.sm1.conj().T @ self.sm1 - self.sm1 @ self.sm1.conj().T)

    @property
    def sz2(self):
        return 0.5 * (self.sm2.conj().T @ self.sm2 - self.sm2 @ self.sm2.conj().T)

    @property
    def num(self):
        return self.a.conj().T @ self.a


def operators(n_max: int) -> Operators:
    sm = np.array([[0, 0], [1, 0]], dtype=complex)  # |up> -> |down>
    i2 = np.eye(2)
    ifock = np.eye(n_max + 1)
    a = np.diag(np.sqrt(np.arange(1, n_max + 1)), 1).astype(complex)
    return Operators(
        sm1=np.kron(np.kron(sm, i2), ifock),
        sm2=np.kron(np.kron(i2, sm), ifock),
        a=np.kron(np.kron(i2, i2), a),
    )


def build_hamiltonian(p: QuantumParams, rotated: bool = True) -> np.ndarray:
    """Hermitian Hamiltonian on the truncated space (J^z realised as sigma^z/2).

    In the rotated frame frequencies are measured from the drive and the
    coherent drive eta (a + a^dag) is included.
    """
    ops = operators(p.n_max)
    sp1, sp2 = ops.sm1.conj().T, ops.sm2.conj().T
    ad = ops.a.conj().T
    if rotated:
        w1, w2, wp = p.omega1 - p.omega_d, p.omega2 - p.omega_d, p.omega_p - p.omega_d
    else:
        w1, w2, wp = p.omega1, p.omega2, p.omega_p
    h = w1 * ops.sz1 + w2 * ops.sz2 + wp * ops.num
    h = h + p.t * (sp1 @ ops.sm2 + ops.sm1 @ sp2)
    h = h + p.kappa1 / SQRT2 * (ad @ ops.sm1 + sp1 @ ops.a)
    h = h + p.kappa2 / SQRT2 * (ad @ ops.sm2 + sp2 @ ops.a)
    if rotated:
        h = h + p.eta * (ops.a + ad)
    return h


def effective_nh(p: QuantumParams, rotated: bool = True) -> np.ndarray:
    """H - i sum_j gamma_j sigma_j^+ sigma_j^-, the no-jump generator (norm decays)."""
    ops = operators(p.n_max)
    h = build_hamiltonian(p, rotated)
    for g, sm in ((p.gamma1, ops.sm1), (p.gamma2, ops.sm2)):
        h = h - 1j * g * (sm.conj().T @ sm)
    return h


SINGLE_EXCITATION = (("up", "down", 0), ("down", "up", 0), ("down", "down", 1))


def single_excitation_block(p: QuantumParams, rotated: bool = False) -> np.ndarray:
    """Effective Hamiltonian projected on |up,down,0>, |down,up,0>, |down,down,1>."""
    idx = [BasisLabel(*lab).index(p.n_max) for lab in SINGLE_EXCITATION]
    h = effective_nh(p.with_(eta=0.0), rotated)
    return h[np.ix_(idx, idx)]


def single_excitation_kernel(delta: float, gamma1: float, gamma2: float, t: float, kappa: float) -> np.ndarray:
    """Reduced 3x3 on |up,down,0>, |down,up,0>, |down,down,1> for equal qubit frequencies.

    ``delta`` is the qubit-photon detuning; rates may take either sign, which
    admits the formal balanced case gamma2 = -gamma1.
    """
    s = kappa / SQRT2
    return np.array(
        [[-1j * gamma1, t, s], [t, -1j * gamma2, s], [s, s, -delta]],
        dtype=complex,
    )


def kernel_4x4(n: int, delta: float, Gamma: float, gamma: float, t: float, kappa: float,
               include_shift: bool = False) -> np.ndarray:
    """Large-n kernel on |uu,n>, |ud,n+1>, |du,n+1>, |dd,n+2>.

    All atom-photon entries are kappa*sqrt(n)/sqrt(2). With ``include_shift``
    the uniform decay -i*Gamma common to the four states is added; the photon
    energy offset is always left out.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    g = kappa * np.sqrt(n) / SQRT2
    k = np.array(
        [
            [delta - 1j * Gamma, g, g, 0.0],
            [g, 1j * gamma, t, g],
            [g, t, -1j * gamma, g],
            [0.0, g, g, -delta + 1j * Gamma],
        ],
        dtype=complex,
    )
    if include_shift:
        k = k - 1j * Gamma * np.eye(4)
    return k


def kernel_energies_squared(n: int, Gamma: float, kappa: float) -> np.ndarray:
    """Closed-form E^2 for t = 0, delta = 0, gamma = -Gamma."""
    a = Gamma ** 2 - n * kappa ** 2
    root = np.sqrt(complex(a * a - Gamma ** 4))
    return np.array([-a + root, -a - root])


def _charpoly(m: np.ndarray) -> np.ndarray:
    """Monic characteristic coefficients (highest first) by Faddeev-LeVerrier."""
    d = m.shape[0]
    c = np.zeros(d + 1, dtype=complex)
    c[0] = 1.0
    mk = np.zeros_like(m)
    eye = np.eye(d)
    for k in range(1, d + 1):
        mk = m @ mk + c[k - 1] * eye
        c[k] = -np.trace(m @ mk) / k
    return c


def kernel_pair_discriminant(n: int, Gamma: float, kappa: float) -> float:
    """Discriminant of the quadratic in E^2 for the kernel at t = 0, delta = 0, gamma = -Gamma.

    Its sign change marks the coalescence of the two E^2 branches.
    """
    c = _charpoly(kernel_4x4(n, 0.0, Gamma, -Gamma, 0.0, kappa))
    b, cc = c[2], c[4]
    return float((b * b - 4 * cc).real)


def kernel_gap_closing(n: int, kappa: float) -> float:
    """Gamma > 0 at which the kernel eigenvalue pairs coalesce, found numerically."""
    if n < 1:
        raise ValueError("n must be at least 1")
    hi = 4 * kappa * np.sqrt(n) + 1.0
    grid = np.linspace(1e-6, hi, 401)
    f = np.array([kernel_pair_discriminant(n, g, kappa) for g in grid])
    i = np.flatnonzero(np.sign(f[:-1]) != np.sign(f[1:]))[0]
    return float(brentq(lambda g: kernel_pair_discriminant(n, g, kappa), grid[i], grid[i + 1],
                        xtol=1e-15, rtol=1e-15))


def kernel_gap(n: int, Gamma: float, kappa: float) -> float:
    """Smallest pairwise eigenvalue distance of the kernel at t = 0, delta = 0, gamma = -Gamma."""
    v = eig_full(kernel_4x4(n, 0.0, Gamma, -Gamma, 0.0, kappa)).values
    return float(min(abs(v[i] - v[j]) for i in range(4) for j in range(i + 1, 4)))


# ---------------------------------------------------------------------------
# Open-system dynamics

def liouvillian(p: QuantumParams, rotated: bool = True) -> np.ndarray:
    """Superoperator of -i[H, rho] + sum_j gamma_j (2 s rho s^+ - s^+ s rho - rho s^+ s)."""
    ops = operators(p.n_max)
    h = build_hamiltonian(p, rotated)
    d = h.shape[0]
    eye = np.eye(d)
    L = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for g, c in ((p.gamma1, ops.sm1), (p.gamma2, ops.sm2)):
        if g == 0:
            continue
        cdc = c.conj().T @ c
        L = L + g * (2 * np.kron(c.conj(), c) - np.kron(eye, cdc) - np.kron(cdc.T, eye))
    return L


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape(d, d, order="F")


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray
    n_max: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    @property
    def top_population(self) -> float:
        """Total population in the highest retained Fock level."""
        diag = np.real(np.diag(self.matrix)).reshape(4, self.n_max + 1)
        return float(diag[:, -1].sum())

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(op @ self.matrix))

    def fidelity_with(self, psi: np.ndarray) -> float:
        psi = np.asarray(psi, dtype=complex)
        return float(np.real(psi.conj() @ self.matrix @ psi))

    def check(self, tol: float = 1e-10, pos_tol: float = 1e-8) -> None:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(self.trace - 1) > tol:
            raise ValueError("density matrix trace differs from one")
        if np.min(np.linalg.eigvalsh(0.5 * (m + m.conj().T))) < -pos_tol:
            raise ValueError("density matrix has a negative eigenvalue")


def normalized_density(m: np.ndarray, n_max: int) -> DensityMatrix:
    m = 0.5 * (m + m.conj().T)
    return DensityMatrix(m / np.trace(m).real, n_max)


def steady_state(L: np.ndarray, n_max: int, tol: float = NULL_TOL) -> DensityMatrix:
    """Unique stationary state from the null space of the Liouvillian."""
    basis = null_space(L, tol)
    if len(basis) == 0:
        raise ValueError("Liouvillian has no null vector at this tolerance")
    if len(basis) > 1:
        raise ValueError(f"steady manifold is {len(basis)}-dimensional")
    d = int(round(np.sqrt(L.shape[0])))
    m = unvec(basis[0], d)
    return normalized_density(m, n_max)


def lindblad_steady_state(p: QuantumParams) -> DensityMatrix:
    return steady_state(liouvillian(p, rotated=True), p.n_max)


def nh_steady_approx(p: QuantumParams) -> DensityMatrix:
    """Pure state of the drive-including no-jump Hamiltonian with the slowest decay."""
    es = eig_full(effective_nh(p, rotated=True))
    rates = np.abs(es.values.imag)
    order = np.argsort(rates)
    if rates[order[1]] - rates[order[0]] < 1e-10:
        raise ValueError("two eigenvalues share the smallest decay rate")
    psi = es.right[:, order[0]]
    psi = psi / np.linalg.norm(psi)
    return DensityMatrix(np.outer(psi, psi.conj()), p.n_max)


def g2_zero(rho: DensityMatrix) -> float:
    """<a^dag a^dag a a> / <a^dag a>^2."""
    a = operators(rho.n_max).a
    ad = a.conj().T
    n1 = rho.expect(ad @ a).real
    if n1 <= 1e-12:
        raise ValueError("photon number vanishes; G2(0) is undefined")
    n2 = rho.expect(ad @ ad @ a @ a).real
    return float(n2 / n1 ** 2)


def populations(rho: DensityMatrix) -> dict:
    diag = np.real(np.diag(rho.matrix))
    return {lab: float(diag[i]) for i, lab in enumerate(basis_labels(rho.n_max))}


def ground_state(n_max: int) -> np.ndarray:
    psi = np.zeros(4 * (n_max + 1), dtype=complex)
    psi[basis_index(DOWN, DOWN, 0, n_max)] = 1.0
    return psi


@dataclass(frozen=True)
class PhotonStatistics:
    g2: float
    n1: float
    n2: float
    p_dd1: float
    p_dd2: float
    top_population: float

    @property
    def population_estimate(self) -> float:
        """2 P(dd2) / P(dd1)^2, the weak-excitation estimate of G2(0)."""
        return 2 * self.p_dd2 / self.p_dd1 ** 2


def photon_statistics(rho: DensityMatrix) -> PhotonStatistics:
    a = operators(rho.n_max).a
    ad = a.conj().T
    pops = np.real(np.diag(rho.matrix))
    return PhotonStatistics(
        g2=g2_zero(rho),
        n1=rho.expect(ad @ a).real,
        n2=rho.expect(ad @ ad @ a @ a).real,
        p_dd1=float(pops[basis_index(DOWN, DOWN, 1, rho.n_max)]),
        p_dd2=float(pops[basis_index(DOWN, DOWN, 2, rho.n_max)]),
        top_population=rho.top_population,
    )
