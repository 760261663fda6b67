"""Three-mode model with saturable gain on atom 1.

The gain ``G1 = alpha / (1 + |psi_1|^2) - beta`` replaces the linear gain.
Steady frequencies are the real roots of a quintic obtained by eliminating
G1 from the real and imaginary parts of det(H_NL - w) = 0.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, replace

import numpy as np

from .integrate import Trajectory, rk4_checked
from .linalg import Polynomial, eigvals, poly_roots

STABILITY_TOL = 1e-8
REAL_ROOT_TOL = 1e-7


@dataclass(frozen=True)
class NonlinearParams:
    omega1: float
    omega2: float
    kappa1: float
    kappa2: float
    t: float
    gamma: float
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if not self.kappa1 > 0:
            raise ValueError("kappa1 must be positive")

    def with_(self, **changes) -> "NonlinearParams":
        return replace(self, **changes)

    @property
    def is_physical(self) -> bool:
        return self.gamma > 0 and self.kappa2 > 0 and self.t > 0


@dataclass(frozen=True)
class SteadySolution:
    omega_s: float
    amplitude: float
    gain: float
    stable: bool
    exponent: float = float("nan")


def saturation_gain(alpha, beta, amp):
    amp = np.asarray(amp, dtype=float)
    if np.any(amp < 0):
        raise ValueError("amplitude must be non-negative")
    return alpha / (1.0 + amp ** 2) - beta


def hamiltonian(p: NonlinearParams, gain: float) -> np.ndarray:
    """H_NL with the gain on atom 1 frozen at ``gain``."""
    return np.array(
        [
            [p.omega1 + 1j * gain, p.kappa1, p.t],
            [p.kappa1, 0.0, p.kappa2],
            [p.t, p.kappa2, p.omega2 - 1j * p.gamma],
        ],
        dtype=complex,
    )


def _coefficient_arrays(w1, w2, k1, k2, t, g):
    x0 = k1 ** 2 * k2 ** 2 * w2 - 2 * k1 * k2 ** 3 * t + w1 * k2 ** 4
    x1 = (-k1 ** 2 * k2 ** 2 + k1 ** 2 * g ** 2 + k1 ** 2 * w2 ** 2 - 2 * k1 * k2 * t * w2
          - k2 ** 4 - k2 ** 2 * t ** 2 + 2 * w1 * k2 ** 2 * w2)
    x2 = (-2 * k1 ** 2 * w2 + 2 * k1 * k2 * t - 2 * k2 ** 2 * w2 - 2 * w1 * k2 ** 2
          + w1 * g ** 2 - t ** 2 * w2 + w1 * w2 ** 2)
    x3 = k1 ** 2 + 2 * k2 ** 2 - g ** 2 + t ** 2 - w2 ** 2 - 2 * w1 * w2
    x4 = w1 + 2 * w2
    return x0, x1, x2, x3, x4


def quintic_coefficients(p: NonlinearParams) -> Polynomial:
    """rho(w) = -w^5 + x4 w^4 + x3 w^3 + x2 w^2 + x1 w + x0, ascending order."""
    xs = _coefficient_arrays(p.omega1, p.omega2, p.kappa1, p.kappa2, p.t, p.gamma)
    return Polynomial([*xs, -1.0])


def gain_for_frequency(p: NonlinearParams, omega_s):
    """G1 solving the imaginary part of the steady condition at ``omega_s``."""
    w = np.asarray(omega_s, dtype=float)
    num = p.kappa1 ** 2 * p.gamma + w * p.gamma * (p.omega1 - w)
    den = p.kappa2 ** 2 + w * (p.omega2 - w)
    return num / den


def steady_residuals(p: NonlinearParams, omega_s: float, gain: float) -> tuple[float, float]:
    """Real and imaginary parts of det(H_NL(gain) - omega_s) split as two equations."""
    w, k1, k2 = omega_s, p.kappa1, p.kappa2
    re = (k1 ** 2 * (p.omega2 - w) + k2 ** 2 * (p.omega1 - w) - 2 * k1 * k2 * p.t
          + w * ((p.omega1 - w) * (p.omega2 - w) + gain * p.gamma - p.t ** 2))
    im = -k1 ** 2 * p.gamma + k2 ** 2 * gain + w * (gain * (p.omega2 - w) - p.gamma * (p.omega1 - w))
    return float(re), float(im)


# ---------------------------------------------------------------------------
# Fifth-order nonlinear exceptional point

NEP_SEED_AXES = (
    np.linspace(-3.0, 3.0, 7),
    np.linspace(-3.0, 3.0, 7),
    np.linspace(0.5, 3.0, 6),
    np.linspace(0.5, 3.0, 6),
    np.linspace(0.5, 5.0, 6),
)


def _nep_target(omega_s: float) -> np.ndarray:
    w = omega_s
    return np.array([w ** 5, -5 * w ** 4, 10 * w ** 3, -10 * w ** 2, 5 * w])


def _nep_residual(x, k1, target):
    xs = _coefficient_arrays(x[0], x[1], k1, x[2], x[3], x[4])
    return np.stack(xs) - target[:, None]


def _nep_jacobian(x, k1):
    w1, w2, k2, t, g = x
    one = np.ones_like(w1)
    zero = np.zeros_like(w1)
    j = np.empty((w1.shape[0], 5, 5))
    # d x0
    j[:, 0] = np.stack([k2 ** 4, k1 ** 2 * k2 ** 2,
                        2 * k1 ** 2 * k2 * w2 - 6 * k1 * k2 ** 2 * t + 4 * w1 * k2 ** 3,
                        -2 * k1 * k2 ** 3, zero], axis=1)
    # d x1
    j[:, 1] = np.stack([2 * k2 ** 2 * w2,
                        2 * k1 ** 2 * w2 - 2 * k1 * k2 * t + 2 * w1 * k2 ** 2,
                        -2 * k1 ** 2 * k2 - 2 * k1 * t * w2 - 4 * k2 ** 3 - 2 * k2 * t ** 2 + 4 * w1 * k2 * w2,
                        -2 * k1 * k2 * w2 - 2 * k2 ** 2 * t,
                        2 * k1 ** 2 * g], axis=1)
    # d x2
    j[:, 2] = np.stack([-2 * k2 ** 2 + g ** 2 + w2 ** 2,
                        -2 * k1 ** 2 - 2 * k2 ** 2 - t ** 2 + 2 * w1 * w2,
                        2 * k1 * t - 4 * k2 * w2 - 4 * w1 * k2,
                        2 * k1 * k2 - 2 * t * w2,
                        2 * w1 * g], axis=1)
    # d x3
    j[:, 3] = np.stack([-2 * w2, -2 * w2 - 2 * w1, 4 * k2, 2 * t, -2 * g], axis=1)
    # d x4
    j[:, 4] = np.stack([one, 2 * one, zero, zero, zero], axis=1)
    return j


def _damped_newton(x, k1, target, iters=80):
    x = x.copy()
    f = _nep_residual(x, k1, target)
    norm = np.max(np.abs(f), axis=0)
    for _ in range(iters):
        active = norm > 1e-14
        if not np.any(active):
            break
        jac = _nep_jacobian(x[:, active], k1)
        rhs = f[:, active].T[..., None]
        with np.errstate(all="ignore"):
            try:
                step = np.linalg.solve(jac, rhs)[..., 0].T
            except np.linalg.LinAlgError:
                step = np.stack([np.linalg.lstsq(a, b[:, 0], rcond=None)[0]
                                 for a, b in zip(jac, rhs)], axis=1)
        lam = np.ones(step.shape[1])
        xa = x[:, active]
        na = norm[active]
        for _ in range(30):
            trial = xa - lam * step
            with np.errstate(all="ignore"):
                ft = _nep_residual(trial, k1, target)
                nt = np.max(np.abs(ft), axis=0)
            bad = ~(nt < na)
            if not np.any(bad):
                break
            lam = np.where(bad, lam / 2, lam)
        ok = nt < na
        idx = np.flatnonzero(active)
        upd = idx[ok]
        x[:, upd] = trial[:, ok]
        f[:, upd] = ft[:, ok]
        norm[upd] = nt[ok]
        if not np.any(ok):
            break
    return x, norm


def nep5_solutions(omega_s: float = 1.0, kappa1: float = 1.0, accept: float = 1e-10) -> list[NonlinearParams]:
    """All distinct physical parameter sets whose quintic is -(w - omega_s)^5.

    Damped Newton runs from every point of a fixed seed grid over
    (omega1, omega2, kappa2, t, gamma).
    """
    if not kappa1 > 0:
        raise ValueError("kappa1 must be positive")
    seeds = np.array(list(itertools.product(*NEP_SEED_AXES))).T
    target = _nep_target(omega_s)
    x, norm = _damped_newton(seeds, kappa1, target)
    good = (norm < accept) & (x[2] > 0) & (x[3] > 0) & (x[4] > 0)
    sols: list[np.ndarray] = []
    for col in np.flatnonzero(good)[np.argsort(norm[good])]:
        cand = x[:, col]
        if not any(np.max(np.abs(cand - s)) < 1e-6 for s in sols):
            sols.append(cand)
    if not sols:
        finite = norm[np.isfinite(norm)]
        best = finite.min() if len(finite) else float("inf")
        raise RuntimeError(f"no physical NEP5 solution found; best residual {best:.3e}")
    return [NonlinearParams(*(float(v) for v in (s[0], s[1], kappa1, s[2], s[3], s[4]))) for s in sols]


def nep5_parameters(omega_s: float = 1.0, kappa1: float = 1.0) -> NonlinearParams:
    """The lowest-residual physical NEP5 parameter set (see nep5_solutions)."""
    return nep5_solutions(omega_s, kappa1)[0]


@dataclass(frozen=True)
class PerturbationResponse:
    epsilon: np.ndarray
    roots: np.ndarray
    n_real: np.ndarray
    shift: np.ndarray
    slope: float


def classify_roots(roots, tol: float = REAL_ROOT_TOL) -> tuple[np.ndarray, list]:
    """Split roots into real ones and conjugate pairs."""
    roots = np.asarray(roots)
    real = roots[np.abs(roots.imag) <= tol].real
    cplx = roots[np.abs(roots.imag) > tol]
    upper = cplx[cplx.imag > 0]
    pairs = []
    for z in upper:
        j = np.argmin(np.abs(cplx - np.conj(z)))
        pairs.append((z, cplx[j]))
    return np.sort(real), pairs


def perturbation_response(nep: NonlinearParams, epsilon_grid, omega_s: float | None = None) -> PerturbationResponse:
    """Quintic roots when omega1 is shifted by each epsilon, and the stable-branch slope."""
    eps = np.asarray(epsilon_grid, dtype=float)
    if omega_s is None:
        omega_s = float(quintic_coefficients(nep).coefficients[4].real / 5.0)
    roots = []
    n_real = []
    shift = []
    for e in eps:
        r = poly_roots(quintic_coefficients(nep.with_(omega1=nep.omega1 + e)))
        roots.append(r)
        real, _ = classify_roots(r)
        n_real.append(len(real))
        shift.append(np.min(np.abs(real - omega_s)) if len(real) else np.nan)
    shift = np.array(shift)
    pos = (eps > 0) & np.isfinite(shift) & (shift > 0)
    slope = float(np.polyfit(np.log(eps[pos]), np.log(shift[pos]), 1)[0]) if pos.sum() >= 2 else float("nan")
    return PerturbationResponse(eps, np.array(roots), np.array(n_real), shift, slope)


# ---------------------------------------------------------------------------
# Time evolution and stability

@dataclass(frozen=True)
class NonlinearRun:
    trajectory: Trajectory
    gain: np.ndarray

    @property
    def times(self):
        return self.trajectory.times

    @property
    def states(self):
        return self.trajectory.states

    @property
    def diverged(self) -> bool:
        return self.trajectory.diverged

    def tail(self, fraction: float = 0.1) -> slice:
        n = len(self.times)
        return slice(n - max(int(round(fraction * (n - 1))), 1) - 1, n)

    @property
    def steady_amplitude(self) -> float:
        """Mean |psi_1| over the last 10% of the run."""
        return float(np.mean(np.abs(self.states[self.tail(), 0])))

    @property
    def steady_gain(self) -> float:
        return float(np.mean(self.gain[self.tail()]))

    @property
    def gain_spread(self) -> float:
        return float(np.std(self.gain[self.tail()]))


DEFAULT_PSI0 = 1e-3 * np.ones(3)


def evolve_nonlinear(p: NonlinearParams, psi0=DEFAULT_PSI0, dt: float = 0.01, T: float | None = None,
                     tol: float = 1e-6) -> NonlinearRun:
    """Integrate i dpsi/dT = H_NL(|psi_1|) psi with RK4 and step-halving control.

    The horizon defaults to 200/kappa1. A run that overflows is returned
    truncated with ``diverged`` set.
    """
    T = 200.0 / p.kappa1 if T is None else T
    h0 = hamiltonian(p, 0.0)
    traj = rk4_checked(h0, psi0, dt, T, tol=tol, measure=lambda s: abs(s[0]),
                       alpha=p.alpha, beta=p.beta, saturable=True)
    gain = p.alpha / (1.0 + np.abs(traj.states[:, 0]) ** 2) - p.beta
    return NonlinearRun(traj, gain)


def jacobian(p: NonlinearParams, phi: np.ndarray, omega_s: float) -> np.ndarray:
    """Jacobian of the real 6-dim flow in the frame rotating at omega_s."""
    phi = np.asarray(phi, dtype=complex)
    a = abs(phi[0])
    g = p.alpha / (1.0 + a * a) - p.beta
    m = -1j * (hamiltonian(p, g) - omega_s * np.eye(3))
    jac = np.block([[m.real, -m.imag], [m.imag, m.real]])
    if a > 0:
        dg = -2.0 * p.alpha * a / (1.0 + a * a) ** 2
        grad = np.zeros(6)
        grad[0] = phi[0].real / a
        grad[3] = phi[0].imag / a
        jac[0] += phi[0].real * dg * grad
        jac[3] += phi[0].imag * dg * grad
    return jac


def steady_vector(p: NonlinearParams, sol: SteadySolution) -> np.ndarray:
    """Right eigenvector of H_NL(gain) at omega_s scaled so |psi_1| = amplitude."""
    if sol.amplitude == 0:
        return np.zeros(3, dtype=complex)
    m = hamiltonian(p, sol.gain) - sol.omega_s * np.eye(3)
    _, _, vh = np.linalg.svd(m)
    v = vh[-1].conj()
    if abs(v[0]) == 0:
        raise ValueError("steady vector has no weight on atom 1")
    return v * (sol.amplitude / v[0])


def stability_of(sol: SteadySolution, p: NonlinearParams) -> tuple[bool, float]:
    """Stability from the spectral abscissa of the linearised flow."""
    phi = steady_vector(p, sol)
    exponent = float(np.max(eigvals(jacobian(p, phi, sol.omega_s)).real))
    return exponent <= STABILITY_TOL, exponent


def steady_solutions(p: NonlinearParams) -> list[SteadySolution]:
    """Finite-amplitude steady states from the real roots of the quintic.

    Each real root fixes G1; the amplitude follows from inverting the
    saturation law and exists only when alpha / (G1 + beta) >= 1.
    """
    real, _ = classify_roots(poly_roots(quintic_coefficients(p)))
    out = []
    for w in real:
        g = float(gain_for_frequency(p, w))
        if not np.isfinite(g) or g + p.beta <= 0:
            continue
        ratio = p.alpha / (g + p.beta)
        if ratio < 1:
            continue
        sol = SteadySolution(float(w), float(np.sqrt(ratio - 1.0)), g, False)
        stable, exponent = stability_of(sol, p)
        out.append(replace(sol, stable=stable, exponent=exponent))
    return out


def zero_solution(p: NonlinearParams) -> SteadySolution:
    sol = SteadySolution(0.0, 0.0, p.alpha - p.beta, False)
    stable, exponent = stability_of(sol, p)
    return replace(sol, stable=stable, exponent=exponent)


@dataclass(frozen=True)
class SteadyMap:
    alpha: np.ndarray
    beta: np.ndarray
    amplitude: np.ndarray
    gain: np.ndarray
    diverged: np.ndarray


def steady_cell(args) -> tuple[float, float, bool]:
    p, dt, T = args
    try:
        run = evolve_nonlinear(p, DEFAULT_PSI0, dt, T)
    except RuntimeError:
        return float("nan"), float("nan"), True
    if run.diverged:
        return float("nan"), float("nan"), True
    return run.steady_amplitude, run.steady_gain, False


def steady_map(p: NonlinearParams, alpha_grid, beta_grid, dt: float = 0.01, T: float | None = None,
               mapper=map) -> SteadyMap:
    """Long-time |psi_1| and G1 over an (alpha, beta) grid.

    Cells are independent; ``mapper`` may be a pool's ordered ``map``.
    """
    alpha = np.asarray(alpha_grid, dtype=float)
    beta = np.asarray(beta_grid, dtype=float)
    if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))):
        raise ValueError("grids must be finite")
    cells = [(p.with_(alpha=float(a), beta=float(b)), dt, T) for a in alpha for b in beta]
    res = list(mapper(steady_cell, cells))
    shape = (len(alpha), len(beta))
    amp = np.array([r[0] for r in res]).reshape(shape)
    gain = np.array([r[1] for r in res]).reshape(shape)
    div = np.array([r[2] for r in res]).reshape(shape)
    return SteadyMap(alpha, beta, amp, gain, div)


def params_dict(p: NonlinearParams) -> dict:
    return asdict(p)
