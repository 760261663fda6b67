"""Fixed-step fourth-order Runge-Kutta for i dpsi/dT = H psi.

An optional saturable gain alpha/(1+|psi_0|^2) - beta acts on component 0,
which is how the nonlinear model enters; with ``saturable=False`` the same
kernel propagates any linear Hamiltonian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

OVERFLOW = 1e150


@njit(cache=True)
def _rhs(h, psi, alpha, beta, saturable):
    out = -1j * (h @ psi)
    if saturable:
        g = alpha / (1.0 + abs(psi[0]) ** 2) - beta
        out[0] += g * psi[0]
    return out


@njit(cache=True)
def _rk4_kernel(h, psi0, dt, nsteps, alpha, beta, saturable, overflow):
    n = psi0.shape[0]
    states = np.empty((nsteps + 1, n), dtype=np.complex128)
    states[0] = psi0
    psi = psi0.copy()
    last = nsteps
    for k in range(nsteps):
        k1 = _rhs(h, psi, alpha, beta, saturable)
        k2 = _rhs(h, psi + 0.5 * dt * k1, alpha, beta, saturable)
        k3 = _rhs(h, psi + 0.5 * dt * k2, alpha, beta, saturable)
        k4 = _rhs(h, psi + dt * k3, alpha, beta, saturable)
        psi = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[k + 1] = psi
        if not np.all(np.isfinite(psi)) or np.max(np.abs(psi)) > overflow:
            last = k + 1
            break
    return states[: last + 1], last == nsteps


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    dt: float
    diverged: bool

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def rk4(h, psi0, dt: float, T: float, alpha: float = 0.0, beta: float = 0.0,
        saturable: bool = False) -> Trajectory:
    """Propagate from 0 to T (T may be negative) with nominal step |dt|."""
    if dt == 0:
        raise ValueError("dt must be non-zero")
    nsteps = int(np.ceil(abs(T) / abs(dt) - 1e-9)) if T != 0 else 0
    step = T / nsteps if nsteps else 0.0
    h = np.ascontiguousarray(np.asarray(h, dtype=complex))
    psi0 = np.ascontiguousarray(np.asarray(psi0, dtype=complex))
    states, finished = _rk4_kernel(h, psi0, step, nsteps, float(alpha), float(beta), saturable, OVERFLOW)
    times = step * np.arange(len(states))
    return Trajectory(times, states, step, not finished)


def rk4_checked(h, psi0, dt: float, T: float, tol: float = 1e-6, max_halvings: int = 6,
                measure=None, **kw) -> Trajectory:
    """RK4 whose step is halved until halving again moves ``measure(final)`` by < tol.

    ``measure`` defaults to the final state vector itself. The tolerance is
    absolute for values up to one and relative beyond that, so growing
    non-Hermitian runs are judged by their relative accuracy.
    """
    measure = measure or (lambda s: s)
    step = abs(dt)
    coarse = rk4(h, psi0, step, T, **kw)
    for _ in range(max_halvings + 1):
        fine = rk4(h, psi0, step / 2, T, **kw)
        if coarse.diverged or fine.diverged:
            return coarse
        a = np.asarray(measure(coarse.final))
        b = np.asarray(measure(fine.final))
        if np.max(np.abs(a - b)) < tol * max(1.0, float(np.max(np.abs(b)))):
            return coarse
        step /= 2
        coarse = fine
    raise RuntimeError("step halving did not converge; reduce dt or the horizon")
