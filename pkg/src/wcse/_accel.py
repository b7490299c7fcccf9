"""Backend selection for the hot numeric kernel.

The only compute-bound inner loop in the package is the cyclic Jacobi
eigensolver; everything else is BLAS-backed numpy. Two interchangeable
implementations live here: a numba ``@njit`` kernel and a pure-numpy
fallback with vectorized rotation updates. Selection happens once at
import time:

* default: numba when importable,
* ``WCSE_DISABLE_NUMBA=1`` (or numba missing): pure numpy.

The flag only swaps the acceleration path; both kernels run the same
rotation schedule with the same convergence rule, so results agree to
floating-point rounding. All documented behavior is identical under
either backend, and any single process is fully deterministic.
"""

import os

import numpy as np


def _numba_disabled() -> bool:
    return os.environ.get("WCSE_DISABLE_NUMBA", "") not in ("", "0")


def _offdiag_norm_numpy(a: np.ndarray) -> float:
    # Summing the off-diagonal entries directly; subtracting the diagonal
    # mass from the total cancels catastrophically near convergence.
    return float(np.sqrt(2.0 * np.sum(np.triu(a, 1) ** 2)))


def jacobi_eigh_numpy(a: np.ndarray, max_sweeps: int, rel_tol: float):
    """Cyclic Jacobi diagonalization of a symmetric matrix, numpy path.

    ``a`` is consumed (pass a copy). Returns
    ``(eigenvalues, eigenvectors, off_diagonal_norm, sweeps, converged)``
    with unsorted eigenvalues on the diagonal order and eigenvectors in
    columns. Convergence: off-diagonal Frobenius norm <= rel_tol * ||A||_F
    of the input.
    """
    n = a.shape[0]
    v = np.eye(n, dtype=np.float64)
    threshold = rel_tol * np.sqrt(np.sum(a * a))
    sweeps = 0
    off = _offdiag_norm_numpy(a)
    while off > threshold and sweeps < max_sweeps:
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                h = aqq - app
                if abs(h) + 100.0 * abs(apq) == abs(h):
                    # pivot negligible next to the diagonal gap
                    t = apq / h
                else:
                    theta = 0.5 * h / apq
                    if theta >= 0.0:
                        t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                    else:
                        t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                tau = s / (1.0 + c)
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = col_p - s * (col_q + tau * col_p)
                a[:, q] = col_q + s * (col_p - tau * col_q)
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, :] = a[:, p].copy()
                a[q, :] = a[:, q].copy()
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = vp - s * (vq + tau * vp)
                v[:, q] = vq + s * (vp - tau * vq)
        sweeps += 1
        off = _offdiag_norm_numpy(a)
    return np.diag(a).copy(), v, off, sweeps, off <= threshold


try:
    if _numba_disabled():
        raise ImportError("numba disabled via WCSE_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

if HAVE_NUMBA:

    @njit(cache=True)
    def _offdiag_norm_jit(a):
        n = a.shape[0]
        total = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                total += a[p, q] * a[p, q] + a[q, p] * a[q, p]
        return np.sqrt(total)

    @njit(cache=True)
    def jacobi_eigh_numba(a, max_sweeps, rel_tol):
        n = a.shape[0]
        v = np.eye(n, dtype=np.float64)
        norm2 = 0.0
        for i in range(n):
            for j in range(n):
                norm2 += a[i, j] * a[i, j]
        threshold = rel_tol * np.sqrt(norm2)
        sweeps = 0
        off = _offdiag_norm_jit(a)
        while off > threshold and sweeps < max_sweeps:
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    app = a[p, p]
                    aqq = a[q, q]
                    h = aqq - app
                    if abs(h) + 100.0 * abs(apq) == abs(h):
                        t = apq / h
                    else:
                        theta = 0.5 * h / apq
                        if theta >= 0.0:
                            t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                        else:
                            t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                    c = 1.0 / np.sqrt(1.0 + t * t)
                    s = t * c
                    tau = s / (1.0 + c)
                    for r in range(n):
                        arp = a[r, p]
                        arq = a[r, q]
                        a[r, p] = arp - s * (arq + tau * arp)
                        a[r, q] = arq + s * (arp - tau * arq)
                    a[p, p] = app - t * apq
                    a[q, q] = aqq + t * apq
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for r in range(n):
                        a[p, r] = a[r, p]
                        a[q, r] = a[r, q]
                    for r in range(n):
                        vrp = v[r, p]
                        vrq = v[r, q]
                        v[r, p] = vrp - s * (vrq + tau * vrp)
                        v[r, q] = vrq + s * (vrp - tau * vrq)
            sweeps += 1
            off = _offdiag_norm_jit(a)
        eigvals = np.empty(n, dtype=np.float64)
        for i in range(n):
            eigvals[i] = a[i, i]
        return eigvals, v, off, sweeps, off <= threshold

    jacobi_eigh = jacobi_eigh_numba
    BACKEND = "numba"
else:
    jacobi_eigh_numba = None
    jacobi_eigh = jacobi_eigh_numpy
    BACKEND = "numpy"


def backend_name() -> str:
    """Name of the active kernel backend ("numba" or "numpy")."""
    return BACKEND
