"""Amplitude dynamics of the linear three-mode model.

Closed-form evolution for the Hermitian case with no atom-atom coupling, and
RK4 propagation for any (possibly non-Hermitian) Hamiltonian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .integrate import Trajectory, rk4_checked
from .linalg import poly_roots
from .semiclassical import dicke_matrix

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class AmplitudeState:
    c1: complex
    cp: complex
    c2: complex
    time: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite([self.c1, self.cp, self.c2, self.time])):
            raise ValueError("amplitudes must be finite")

    @classmethod
    def from_vector(cls, v, time: float = 0.0) -> "AmplitudeState":
        return cls(complex(v[0]), complex(v[1]), complex(v[2]), float(time))

    def vector(self) -> np.ndarray:
        return np.array([self.c1, self.cp, self.c2], dtype=complex)

    @property
    def norm2(self) -> float:
        return float(np.sum(np.abs(self.vector()) ** 2))


ATOM1 = AmplitudeState(1.0, 0.0, 0.0)
PHOTON = AmplitudeState(0.0, 1.0, 0.0)
ATOM2 = AmplitudeState(0.0, 0.0, 1.0)


def rabi_frequency(delta: float, kappa: float) -> float:
    return float(np.sqrt(delta ** 2 + 4 * kappa ** 2))


def hermitian_analytic(initial: AmplitudeState, delta: float, kappa: float, T) -> AmplitudeState | list:
    """Exact amplitudes at time(s) T for gamma = 0, t = 0.

    Scalar T returns one state; an array returns a list of states.
    """
    omega = rabi_frequency(delta, kappa)
    x1 = 0.5j * (omega - delta)
    x2 = -0.5j * (omega + delta)
    x3 = x1 + x2
    s = initial.c1 + initial.c2
    P = ((omega - delta) * s - 2 * SQRT2 * kappa * initial.cp) / (4 * omega)
    Q = ((omega + delta) * s + 2 * SQRT2 * kappa * initial.cp) / (4 * omega)
    R = 0.5 * (initial.c2 - initial.c1)

    def at(tau):
        e1, e2, e3 = np.exp(x1 * tau), np.exp(x2 * tau), np.exp(x3 * tau)
        c1 = P * e1 + Q * e2 - R * e3
        cp = -(SQRT2 * 1j / kappa) * (P * x2 * e1 + Q * x1 * e2)
        c2 = P * e1 + Q * e2 + R * e3
        return AmplitudeState(complex(c1), complex(cp), complex(c2), initial.time + float(tau))

    if np.ndim(T) == 0:
        return at(float(T))
    return [at(float(x)) for x in np.asarray(T)]


def evolve_linear(H, initial: AmplitudeState, dt: float = 0.005, T: float = 20.0,
                  tol: float = 1e-6) -> Trajectory:
    """RK4 solution of i dpsi/dT = H psi from ``initial`` (T < 0 runs backwards)."""
    traj = rk4_checked(H, initial.vector(), dt, T, tol=tol)
    return Trajectory(traj.times + initial.time, traj.states, traj.dt, traj.diverged)


def states_of(traj: Trajectory) -> list[AmplitudeState]:
    return [AmplitudeState.from_vector(v, t) for t, v in zip(traj.times, traj.states)]


def norm_history(trajectory) -> np.ndarray:
    """Total probability sum |amplitude|^2 at every recorded step."""
    if isinstance(trajectory, Trajectory):
        states = trajectory.states
    else:
        states = np.array([s.vector() for s in trajectory])
    if len(states) == 0:
        raise ValueError("empty trajectory")
    return np.sum(np.abs(states) ** 2, axis=1)


def growth_cubic_roots(delta: float, gamma: float, kappa: float) -> np.ndarray:
    """Roots of Y^3 + 2i delta Y^2 - (delta^2 + gamma^2 - kappa^2) Y + i delta kappa^2.

    These are the exponents of the t = 0 amplitudes, ordered by real part.
    """
    roots = poly_roots([1j * delta * kappa ** 2, -(delta ** 2 + gamma ** 2 - kappa ** 2), 2j * delta, 1.0])
    return roots[np.argsort(roots.real, kind="stable")]


def growth_rate(delta: float, gamma: float, kappa: float) -> float:
    """Asymptotic rate of d log(norm)/dT, twice the largest real exponent."""
    return float(2 * growth_cubic_roots(delta, gamma, kappa)[-1].real)


def fitted_growth_rate(traj: Trajectory, start_fraction: float = 0.5) -> float:
    """Slope of log(norm) over the late part of a trajectory."""
    n = norm_history(traj)
    i0 = int(start_fraction * len(n))
    return float(np.polyfit(traj.times[i0:], np.log(n[i0:]), 1)[0])


def dicke_t0(delta: float, gamma: float, kappa: float) -> np.ndarray:
    return dicke_matrix(delta, gamma, 0.0, kappa)
