"""Dense complex linear algebra used by every model in the package.

The eigensolver is a Householder reduction to Hessenberg form followed by a
complex single-shift QR iteration. Right eigenvectors come from the triangular
Schur factor; left eigenvectors are rows of the inverse of the right-vector
matrix when that matrix is well conditioned, otherwise they are obtained from
the eigendecomposition of the conjugate transpose.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.optimize import linear_sum_assignment

EPS = np.finfo(float).eps
LEFT_COND_LIMIT = 1e8
DEFECT_TOL = 1e-6


class ConvergenceError(np.linalg.LinAlgError):
    """Raised when the QR iteration exhausts its iteration budget."""


class TrackingError(ValueError):
    """Raised when eigenvalue continuation between two sweep steps is ambiguous."""


def as_matrix(m) -> np.ndarray:
    """Validate and copy a square finite matrix as complex128."""
    a = np.array(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


# ---------------------------------------------------------------------------
# Schur decomposition

@njit(cache=True)
def _givens(x, y):
    """Return (c, s) with [[c, s], [-conj(s), c]] @ [x, y] = [r, 0]."""
    ax = abs(x)
    ay = abs(y)
    if ay == 0.0:
        return 1.0, 0j
    if ax == 0.0:
        return 0.0, np.conj(y) / ay
    nrm = np.hypot(ax, ay)
    return ax / nrm, (x / ax) * np.conj(y) / nrm


@njit(cache=True)
def _hessenberg_kernel(h, q):
    n = h.shape[0]
    for k in range(n - 2):
        alpha = np.sqrt(np.sum(np.abs(h[k + 1:, k]) ** 2))
        if alpha == 0.0:
            continue
        v = h[k + 1:, k].copy()
        x0 = v[0]
        phase = x0 / abs(x0) if x0 != 0 else 1.0 + 0j
        v[0] += phase * alpha
        v /= np.sqrt(np.sum(np.abs(v) ** 2))
        vc = np.conj(v)
        w = vc @ np.ascontiguousarray(h[k + 1:, k:])
        for i in range(v.shape[0]):
            h[k + 1 + i, k:] -= 2.0 * v[i] * w
        w = np.ascontiguousarray(h[:, k + 1:]) @ v
        for j in range(v.shape[0]):
            h[:, k + 1 + j] -= 2.0 * w * vc[j]
        w = np.ascontiguousarray(q[:, k + 1:]) @ v
        for j in range(v.shape[0]):
            q[:, k + 1 + j] -= 2.0 * w * vc[j]
        h[k + 2:, k] = 0.0


@njit(cache=True)
def _qr_kernel(h, z, max_sweeps):
    """Shifted QR on a Hessenberg matrix in place; returns False on budget overrun."""
    n = h.shape[0]
    eps = 2.220446049250313e-16
    scale = np.sqrt(np.sum(np.abs(h) ** 2))
    if scale == 0.0:
        return True
    budget = max_sweeps * n
    total = 0
    since = 0
    hi = n - 1
    while hi > 0:
        lo = hi
        while lo > 0:
            s = abs(h[lo - 1, lo - 1]) + abs(h[lo, lo])
            if s == 0.0:
                s = scale
            if abs(h[lo, lo - 1]) <= eps * s:
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            hi -= 1
            since = 0
            continue
        total += 1
        since += 1
        if total > budget:
            return False
        if since % 11 == 0:
            # exceptional shift breaks cycles of the standard shift
            mu = h[hi, hi] + 0.75 * abs(h[hi, hi - 1]) * np.exp(1j * 0.3 * since)
        else:
            a = h[hi - 1, hi - 1]
            d = h[hi, hi]
            half = 0.5 * (a - d)
            root = np.sqrt(half * half + h[hi - 1, hi] * h[hi, hi - 1])
            mu1 = d + half + root
            mu2 = d + half - root
            mu = mu1 if abs(mu1 - d) < abs(mu2 - d) else mu2
        x = h[lo, lo] - mu
        y = h[lo + 1, lo]
        for k in range(lo, hi):
            if k > lo:
                x = h[k, k - 1]
                y = h[k + 1, k - 1]
            c, s = _givens(x, y)
            sc = np.conj(s)
            for j in range(max(k - 1, 0), n):
                p = h[k, j]
                r = h[k + 1, j]
                h[k, j] = c * p + s * r
                h[k + 1, j] = -sc * p + c * r
            for i in range(min(k + 3, hi + 1)):
                p = h[i, k]
                r = h[i, k + 1]
                h[i, k] = c * p + sc * r
                h[i, k + 1] = -s * p + c * r
            for i in range(n):
                p = z[i, k]
                r = z[i, k + 1]
                z[i, k] = c * p + sc * r
                z[i, k + 1] = -s * p + c * r
            if k > lo:
                h[k + 1, k - 1] = 0.0
    return True


@njit(cache=True)
def _triangular_kernel(t, small):
    n = t.shape[0]
    x = np.zeros((n, n), dtype=np.complex128)
    for k in range(n):
        lam = t[k, k]
        x[k, k] = 1.0
        for i in range(k - 1, -1, -1):
            denom = t[i, i] - lam
            if abs(denom) < small:
                denom = small
            acc = 0j
            for j in range(i + 1, k + 1):
                acc += t[i, j] * x[j, k]
            x[i, k] = -acc / denom
        nrm = np.sqrt(np.sum(np.abs(x[:k + 1, k]) ** 2))
        if nrm == 0.0 or not np.isfinite(nrm):
            return x, False
        x[:k + 1, k] /= nrm
    return x, True


def hessenberg(m) -> tuple[np.ndarray, np.ndarray]:
    """Householder reduction ``m = q @ h @ q^H`` with ``h`` upper Hessenberg."""
    h = as_matrix(m)
    q = np.eye(h.shape[0], dtype=complex)
    _hessenberg_kernel(h, q)
    return h, q


def schur(m, max_sweeps: int = 40) -> tuple[np.ndarray, np.ndarray]:
    """Complex Schur form ``m = z @ t @ z^H`` by shifted QR on the Hessenberg form.

    The budget is ``max_sweeps`` QR sweeps per eigenvalue; exceeding it raises
    ConvergenceError rather than returning an unconverged factor.
    """
    h, z = hessenberg(m)
    if not _qr_kernel(h, z, max_sweeps):
        raise ConvergenceError(f"QR iteration did not converge within {max_sweeps * len(h)} sweeps")
    return np.triu(h), z


def _triangular_eigenvectors(t: np.ndarray) -> np.ndarray:
    """Eigenvectors of an upper-triangular matrix by back substitution."""
    small = EPS * max(np.linalg.norm(t), np.finfo(float).tiny)
    x, ok = _triangular_kernel(np.ascontiguousarray(t), small)
    if not ok:
        raise ConvergenceError("eigenvector back substitution overflowed")
    return x


def eigvals(m) -> np.ndarray:
    """Eigenvalues only, unsorted."""
    t, _ = schur(m)
    return np.diag(t).copy()


def sort_order(values: np.ndarray, rel_tol: float = 1e-9) -> np.ndarray:
    """Ascending by real part, imaginary part breaking near-ties."""
    values = np.asarray(values)
    scale = max(np.max(np.abs(values)), 1.0)
    tol = rel_tol * scale
    order = list(np.argsort(values.real, kind="stable"))
    out = []
    i = 0
    while i < len(order):
        j = i + 1
        while j < len(order) and values[order[j]].real - values[order[j - 1]].real <= tol:
            j += 1
        block = order[i:j]
        out.extend(sorted(block, key=lambda q: values[q].imag))
        i = j
    return np.array(out, dtype=int)


# ---------------------------------------------------------------------------
# Eigen systems

@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues with paired right (columns) and left (rows) eigenvectors.

    ``left[i] @ right[:, i]`` is stored in ``overlaps``; away from exceptional
    points the left rows are scaled so that this overlap equals one.
    """

    values: np.ndarray
    right: np.ndarray
    left: np.ndarray
    pairing: np.ndarray
    left_method: str
    condition: float
    defective: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def dim(self) -> int:
        return len(self.values)

    @property
    def overlaps(self) -> np.ndarray:
        return np.einsum("ij,ji->i", self.left, self.right)

    @property
    def is_defective(self) -> bool:
        return bool(np.any(self.defective))

    def permuted(self, perm) -> "EigenSystem":
        perm = np.asarray(perm, dtype=int)
        return EigenSystem(
            values=self.values[perm],
            right=self.right[:, perm],
            left=self.left[perm],
            pairing=np.arange(len(perm)),
            left_method=self.left_method,
            condition=self.condition,
            defective=self.defective[perm] if len(self.defective) else self.defective,
        )

    def reconstruct(self) -> np.ndarray:
        """Spectral sum of value * |right><left| / <left|right>."""
        w = self.values / self.overlaps
        return (self.right * w) @ self.left


def _adjoint_left(a: np.ndarray, values: np.ndarray) -> np.ndarray:
    t, z = schur(a.conj().T)
    wv = z @ _triangular_eigenvectors(t)
    mu = np.conj(np.diag(t))
    cost = np.abs(values[:, None] - mu[None, :])
    rows, cols = linear_sum_assignment(cost)
    left = np.empty((len(values), len(values)), dtype=complex)
    left[rows] = wv[:, cols].conj().T
    return left


def multiplicities(m, values, cluster_tol: float = 1e-4, defect_tol: float = DEFECT_TOL):
    """Algebraic and geometric multiplicity of each eigenvalue.

    Eigenvalues closer than ``cluster_tol * max(||m||, 1)`` are treated as one
    cluster. The geometric multiplicity counts singular values of
    ``m - mean(cluster) * I`` below ``defect_tol * ||m||``.
    """
    a = as_matrix(m)
    values = np.asarray(values)
    norm = np.linalg.norm(a, 2)
    ctol = cluster_tol * max(norm, 1.0)
    n = len(values)
    label = -np.ones(n, dtype=int)
    nclusters = 0
    for i in range(n):
        if label[i] >= 0:
            continue
        label[i] = nclusters
        stack = [i]
        while stack:
            p = stack.pop()
            for q in range(n):
                if label[q] < 0 and abs(values[p] - values[q]) < ctol:
                    label[q] = nclusters
                    stack.append(q)
        nclusters += 1
    alg = np.ones(n, dtype=int)
    geo = np.ones(n, dtype=int)
    for c in range(nclusters):
        members = np.flatnonzero(label == c)
        if len(members) == 1:
            continue
        centre = values[members].mean()
        sv = np.linalg.svd(a - centre * np.eye(len(a)), compute_uv=False)
        g = int(np.sum(sv <= defect_tol * max(norm, np.finfo(float).tiny)))
        alg[members] = len(members)
        geo[members] = max(g, 1)
    return alg, geo


def eig_full(m) -> EigenSystem:
    """Full eigendecomposition with paired left and right eigenvectors."""
    a = as_matrix(m)
    n = a.shape[0]
    t, z = schur(a)
    values = np.diag(t).copy()
    right = z @ _triangular_eigenvectors(t)
    right /= np.linalg.norm(right, axis=0)
    order = sort_order(values)
    values = values[order]
    right = right[:, order]

    cond = np.linalg.cond(right)
    if np.isfinite(cond) and cond < LEFT_COND_LIMIT:
        left = np.linalg.inv(right)
        method = "inverse"
    else:
        left = _adjoint_left(a, values)
        method = "adjoint"
        ov = np.einsum("ij,ji->i", left, right)
        scale = np.linalg.norm(left, axis=1)
        for i in range(n):
            if abs(ov[i]) > 1e-12 * scale[i]:
                left[i] /= ov[i]
            else:
                left[i] /= scale[i]
    alg, geo = multiplicities(a, values)
    return EigenSystem(
        values=values,
        right=right,
        left=left,
        pairing=np.arange(n),
        left_method=method,
        condition=float(cond),
        defective=geo < alg,
    )


def geometric_multiplicity(m, value: complex, tol: float = DEFECT_TOL) -> int:
    """Number of singular values of ``m - value*I`` below ``tol * ||m||``."""
    a = as_matrix(m)
    sv = np.linalg.svd(a - value * np.eye(len(a)), compute_uv=False)
    return int(np.sum(sv <= tol * np.linalg.norm(a, 2)))


def null_space(m, tol: float = 1e-10) -> list[np.ndarray]:
    """Orthonormal basis of the right null space.

    Singular values at or below ``tol * sigma_max`` count as zero; a zero
    matrix returns the full coordinate basis. Returns an empty list when the
    null space is trivial.
    """
    a = as_matrix(m)
    _, s, vh = np.linalg.svd(a)
    smax = s[0] if len(s) else 0.0
    if smax == 0.0:
        return [row for row in np.eye(a.shape[1], dtype=complex)]
    mask = s <= tol * smax
    return [vh[i].conj() for i in np.flatnonzero(mask)]


# ---------------------------------------------------------------------------
# Polynomials

@dataclass(frozen=True)
class Polynomial:
    """Polynomial with coefficients in ascending degree order."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.trim_zeros(np.asarray(self.coefficients, dtype=complex), "b")
        if len(c) == 0:
            raise ValueError("zero polynomial")
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def from_roots(cls, roots, leading: complex = 1.0) -> "Polynomial":
        c = np.array([leading], dtype=complex)
        for r in roots:
            c = np.convolve(c, [-r, 1.0])
        return cls(c)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coefficients)

    def derivative(self, x):
        """Value of the first derivative at ``x``."""
        c = self.coefficients
        return np.polynomial.polynomial.polyval(x, c[1:] * np.arange(1, len(c)))

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.coefficients.imag == 0))


def companion(p: Polynomial) -> np.ndarray:
    c = p.coefficients
    n = p.degree
    comp = np.zeros((n, n), dtype=complex)
    comp[1:, :-1] = np.eye(n - 1)
    comp[:, -1] = -c[:-1] / c[-1]
    return comp


def _aberth(p: Polynomial, z: np.ndarray, iters: int = 60) -> np.ndarray:
    z = z.astype(complex).copy()
    best = z.copy()
    best_res = np.abs(p(z))
    for _ in range(iters):
        f = p(z)
        d = p.derivative(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = f / d
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            corr = ratio / (1.0 - ratio * inv.sum(axis=1))
        corr = np.where(np.isfinite(corr), corr, 0.0)
        z = z - corr
        res = np.abs(p(z))
        improved = res < best_res
        best[improved] = z[improved]
        best_res = np.minimum(best_res, res)
        if np.all(np.abs(corr) <= 4 * EPS * np.maximum(np.abs(z), 1.0)):
            break
    return best


def poly_roots(p) -> np.ndarray:
    """All complex roots with multiplicity, sorted like eigenvalues.

    Companion-matrix eigenvalues from the in-repo QR solver seed an Aberth
    refinement that only keeps updates lowering |p(root)|.
    """
    if not isinstance(p, Polynomial):
        p = Polynomial(p)
    if p.degree < 1:
        raise ValueError("polynomial of degree 0 has no roots")
    c = p.coefficients
    nz = 0
    while c[nz] == 0:
        nz += 1
    reduced = Polynomial(c[nz:])
    roots = np.zeros(nz, dtype=complex)
    if reduced.degree >= 1:
        seed = eigvals(companion(reduced))
        roots = np.concatenate([roots, _aberth(reduced, seed)])
    roots = roots[sort_order(roots)]
    tol = 1e-9 * np.max(np.abs(c))
    if np.max(np.abs(p(roots))) > tol:
        raise ConvergenceError("polynomial roots failed to reach the residual target")
    return roots


# ---------------------------------------------------------------------------
# Band tracking

@dataclass(frozen=True)
class TrackedSweep:
    systems: list
    flagged: list

    @property
    def values(self) -> np.ndarray:
        return np.array([es.values for es in self.systems])


def match_step(reference: np.ndarray, candidates: np.ndarray) -> tuple[np.ndarray, bool]:
    """Optimal one-to-one matching and whether it is unambiguous.

    The match for ``reference[i]`` is accepted when it is at least twice as
    close as any other candidate, i.e. the motion is below half the local gap.
    """
    cost = np.abs(reference[:, None] - candidates[None, :])
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(len(reference), dtype=int)
    perm[rows] = cols
    ok = True
    scale = max(np.max(np.abs(reference)), 1.0)
    for i, j in enumerate(perm):
        d = cost[i, j]
        others = np.delete(cost[i], j)
        if len(others) and d > 1e-12 * scale and d >= 0.5 * others.min():
            ok = False
            break
    return perm, ok


def track_bands(sweep, strict: bool = True) -> TrackedSweep:
    """Reorder each step so ``values[i]`` continues step-0 ``values[i]``.

    Each step is matched to a linear extrapolation from the two previous steps,
    which resolves straight crossings. With ``strict`` an ambiguous step raises
    TrackingError; otherwise the optimal assignment is kept and the step index
    is listed in ``flagged``.
    """
    sweep = list(sweep)
    if not sweep:
        return TrackedSweep([], [])
    out = [sweep[0]]
    flagged = []
    for k in range(1, len(sweep)):
        prev = out[-1].values
        pred = 2 * prev - out[-2].values if k >= 2 else prev
        perm, ok = match_step(pred, sweep[k].values)
        if not ok and k >= 2:
            perm0, ok0 = match_step(prev, sweep[k].values)
            if ok0:
                perm, ok = perm0, ok0
        if not ok:
            if strict:
                raise TrackingError(
                    f"ambiguous eigenvalue continuation at step {k}; refine the parameter grid"
                )
            flagged.append(k)
        out.append(sweep[k].permuted(perm))
    return TrackedSweep(out, flagged)
