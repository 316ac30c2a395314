"""Symmetric eigensolver: Householder tridiagonalization + implicit-shift QL.

Dense-only, sized for the small Gram matrices this package produces
(n <= 512). The QL iteration follows the classic EISPACK tql2 scheme;
eigenvalues come back in descending order. A values-only path skips the
eigenvector rotations, which matters on the acquisition hot path where
thousands of small matrices are scored per experiment.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import EigenError

_EPS = np.finfo(np.float64).eps
_MAX_QL_ITER = 64


def _check_square_symmetric(A, sym_tol):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise EigenError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise EigenError("matrix has non-finite entries")
    scale = np.abs(A).max() if A.size else 0.0
    asym = np.abs(A - A.T).max() if A.size else 0.0
    if asym > sym_tol * max(scale, 1.0):
        raise EigenError(
            f"matrix is not symmetric: max|A - A^T| = {asym:.3e} at scale {scale:.3e}"
        )
    return 0.5 * (A + A.T)


def _tridiagonalize(A, want_vectors):
    """Reduce symmetric A in place to tridiagonal (d, e); Q^T A Q = T."""
    a = A.copy()
    n = a.shape[0]
    q = np.eye(n) if want_vectors else None
    for k in range(n - 2):
        x = a[k + 1 :, k].copy()
        norm_x = np.linalg.norm(x)
        if norm_x == 0.0:
            continue
        alpha = -math.copysign(norm_x, x[0] if x[0] != 0.0 else 1.0)
        v = x
        v[0] -= alpha
        vnorm = np.linalg.norm(v)
        if vnorm == 0.0:
            continue
        v /= vnorm
        block = a[k + 1 :, k + 1 :]
        p = block @ v
        w = p - (v @ p) * v
        block -= 2.0 * (np.outer(v, w) + np.outer(w, v))
        a[k + 1, k] = alpha
        a[k, k + 1] = alpha
        a[k + 2 :, k] = 0.0
        a[k, k + 2 :] = 0.0
        if want_vectors:
            q[:, k + 1 :] -= 2.0 * np.outer(q[:, k + 1 :] @ v, v)
    d = np.diag(a).copy()
    e = np.append(np.diag(a, -1), 0.0)  # e[i] couples d[i], d[i+1]; padded
    return d, e, q


def _ql_implicit(d_arr, e_arr, z):
    """EISPACK-style implicit-shift QL on a tridiagonal; rotates z columns.

    Works on plain lists internally: the recurrence is scalar-heavy and
    python floats are much cheaper there than numpy indexing.
    """
    n = d_arr.size
    d = d_arr.tolist()
    e = e_arr.tolist()
    f = 0.0
    tst1 = 0.0
    for l in range(n):
        tst1 = max(tst1, abs(d[l]) + abs(e[l]))
        m = l
        while m < n - 1 and abs(e[m]) > _EPS * tst1:
            m += 1
        if m > l:
            for iteration in range(_MAX_QL_ITER + 1):
                if iteration == _MAX_QL_ITER:
                    raise EigenError(f"QL iteration failed to converge at index {l}")
                g = d[l]
                p = (d[l + 1] - g) / (2.0 * e[l])
                r = math.hypot(p, 1.0)
                if p < 0.0:
                    r = -r
                d[l] = e[l] / (p + r)
                d[l + 1] = e[l] * (p + r)
                dl1 = d[l + 1]
                h = g - d[l]
                for j in range(l + 2, n):
                    d[j] -= h
                f += h
                # implicit QL sweep from m down to l
                p = d[m]
                c = 1.0
                c2 = c
                c3 = c
                el1 = e[l + 1]
                s = 0.0
                s2 = 0.0
                for i in range(m - 1, l - 1, -1):
                    c3 = c2
                    c2 = c
                    s2 = s
                    g = c * e[i]
                    h = c * p
                    r = math.hypot(p, e[i])
                    e[i + 1] = s * r
                    s = e[i] / r
                    c = p / r
                    p = c * d[i] - s * g
                    d[i + 1] = h + s * (c * g + s * d[i])
                    if z is not None:
                        zi = z[:, i].copy()
                        z[:, i] = c * zi - s * z[:, i + 1]
                        z[:, i + 1] = s * zi + c * z[:, i + 1]
                p = -s * s2 * c3 * el1 * e[l] / dl1
                e[l] = s * p
                d[l] = c * p
                if abs(e[l]) <= _EPS * tst1:
                    break
        d[l] += f
        e[l] = 0.0
    d_arr[:] = d


def symmetric_eigh(A, sym_tol: float = 1e-8):
    """All eigenpairs of a symmetric matrix, eigenvalues descending.

    Returns (eigenvalues, eigenvectors) with eigenvectors in columns.
    Input asymmetric beyond sym_tol (relative to max|A|) is rejected.
    """
    S = _check_square_symmetric(A, sym_tol)
    n = S.shape[0]
    if n == 1:
        return S[0, 0:1].copy(), np.ones((1, 1))
    d, e, q = _tridiagonalize(S, want_vectors=True)
    _ql_implicit(d, e, q)
    order = np.argsort(-d, kind="stable")
    return d[order], q[:, order]


def symmetric_eigvals(A, sym_tol: float = 1e-8):
    """Eigenvalues only, descending. Skips eigenvector accumulation."""
    S = _check_square_symmetric(A, sym_tol)
    n = S.shape[0]
    if n == 1:
        return S[0, 0:1].copy()
    d, e, _ = _tridiagonalize(S, want_vectors=False)
    _ql_implicit(d, e, None)
    return np.sort(d)[::-1].copy()
