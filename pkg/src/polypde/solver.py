"""Sparse solvers with timing: direct Cholesky and IC(0)-preconditioned CG.

Both accept a ``DiscreteSystem`` (solved on its free DOFs after Dirichlet
elimination, returned as the full DOF vector) or a plain ``(A, b)`` pair.
The timer wraps only the factorisation and solve calls.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from polypde.fem import DiscreteSystem

try:  # optional CHOLMOD backend
    from sksparse.cholmod import CholmodNotPositiveDefiniteError, cholesky as _cholmod
except ImportError:  # pragma: no cover - depends on the environment
    _cholmod = None
    CholmodNotPositiveDefiniteError = None

SOLVER_IDS = ("direct", "pcg")
MAX_RESTARTS = 5


class SolverError(RuntimeError):
    pass


class IterativeFailure(SolverError):
    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass
class SolveReport:
    solution: np.ndarray
    wall_time: float
    method: str
    iterations: int
    residual: float
    factor_time: float = 0.0
    backend: str = ""


def _unpack(system):
    if isinstance(system, DiscreteSystem):
        A, b = system.reduced()
        return A, b, system
    A, b = system
    A = sp.csr_matrix(A)
    return A, np.asarray(b, dtype=float), None


def _kernel_hint(sysobj) -> str:
    if sysobj is None or len(sysobj.constrained_dofs):
        return "matrix is singular"
    dim = 1 if sysobj.kind == "poisson" else 3
    return f"matrix is singular: no Dirichlet constraints, kernel dimension {dim} (rigid or constant modes)"


def relative_residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return float(r / nb) if nb > 0 else float(r)


def _finish(sysobj, x, A, b, t, method, its, tf, backend):
    res = relative_residual(A, x, b)
    full = sysobj.expand(x) if sysobj is not None else x
    return SolveReport(full, t, method, its, res, tf, backend)


def solve_direct(system) -> SolveReport:
    A, b, sysobj = _unpack(system)
    if sysobj is not None and not len(sysobj.constrained_dofs):
        raise SolverError(_kernel_hint(sysobj))
    if A.shape[0] == 0:
        return _finish(sysobj, np.zeros(0), A, b, 0.0, "direct", 0, 0.0, "none")
    Ac = A.tocsc()
    backend = "cholmod"
    t0 = time.perf_counter()
    try:
        if _cholmod is None:
            raise LookupError
        factor = _cholmod(Ac)
        tf = time.perf_counter() - t0
        x = factor(b)
    except Exception as err:  # not SPD or no CHOLMOD: general sparse LU
        if _cholmod is not None and not isinstance(err, (CholmodNotPositiveDefiniteError, LookupError)):
            raise
        backend = "splu"
        t0 = time.perf_counter()
        try:
            lu = sla.splu(Ac)
        except RuntimeError as e:
            raise SolverError(f"{_kernel_hint(sysobj)} ({e})") from None
        tf = time.perf_counter() - t0
        x = lu.solve(b)
    t = time.perf_counter() - t0
    if not np.all(np.isfinite(x)):
        raise SolverError(_kernel_hint(sysobj))
    return _finish(sysobj, x, A, b, t, "direct", 0, tf, backend)


# ---------------------------------------------------------------------------
# IC(0)
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _ic0(indptr, indices, data, n):
    """In-place zero-fill incomplete Cholesky of a sorted lower-triangular CSR.

    Returns the row of the first nonpositive pivot, or -1 on success.
    """
    diag = np.empty(n, dtype=np.int64)
    for i in range(n):
        diag[i] = indptr[i + 1] - 1  # diagonal is last in a sorted lower row
    for i in range(n):
        s, e = indptr[i], indptr[i + 1]
        for p in range(s, e - 1):
            k = indices[p]
            # dot of row i and row k over columns < k
            acc = 0.0
            a, b = s, indptr[k]
            ea, eb = p, diag[k]
            while a < ea and b < eb:
                ca, cb = indices[a], indices[b]
                if ca == cb:
                    acc += data[a] * data[b]
                    a += 1
                    b += 1
                elif ca < cb:
                    a += 1
                else:
                    b += 1
            data[p] = (data[p] - acc) / data[diag[k]]
        d = data[e - 1]
        for p in range(s, e - 1):
            d -= data[p] * data[p]
        if d <= 0.0:
            return i
        data[e - 1] = np.sqrt(d)
    return -1


@numba.njit(cache=True)
def _ic0_apply(indptr, indices, data, r):
    n = len(r)
    y = r.copy()
    for i in range(n):
        s, e = indptr[i], indptr[i + 1]
        acc = y[i]
        for p in range(s, e - 1):
            acc -= data[p] * y[indices[p]]
        y[i] = acc / data[e - 1]
    for i in range(n - 1, -1, -1):
        s, e = indptr[i], indptr[i + 1]
        y[i] /= data[e - 1]
        for p in range(s, e - 1):
            y[indices[p]] -= data[p] * y[i]
    return y


def incomplete_cholesky(A: sp.csr_matrix, max_shifts: int = 12):
    """IC(0) factor ``L`` (CSR, lower) with a diagonal shift on breakdown.

    Returns ``(L, shift)`` where ``L L^T`` approximates ``A + shift * diag(A)``.
    """
    L0 = sp.tril(A, format="csr")
    L0.sort_indices()
    d = A.diagonal()
    if np.any(d <= 0):
        raise SolverError("matrix has a nonpositive diagonal entry; not SPD")
    shift = 0.0
    for _ in range(max_shifts + 1):
        L = L0.copy()
        if shift:
            L = (L + sp.diags(shift * d)).tocsr()
            L.sort_indices()
        if _ic0(L.indptr.astype(np.int64), L.indices.astype(np.int64), L.data, L.shape[0]) < 0:
            return L, shift
        shift = 1e-3 if shift == 0 else 2 * shift
    raise SolverError("incomplete Cholesky broke down even with diagonal shifting")


def solve_pcg(system, tol: float = 1e-10, max_iter: int | None = None) -> SolveReport:
    A, b, sysobj = _unpack(system)
    n = A.shape[0]
    if n == 0:
        return _finish(sysobj, np.zeros(0), A, b, 0.0, "pcg", 0, 0.0, "cg+ic0")
    max_iter = 20 * n if max_iter is None else int(max_iter)
    t0 = time.perf_counter()
    L, shift = incomplete_cholesky(A)
    ip, ix, dat = L.indptr.astype(np.int64), L.indices.astype(np.int64), L.data
    tf = time.perf_counter() - t0
    M = sla.LinearOperator((n, n), matvec=lambda r: _ic0_apply(ip, ix, dat, np.asarray(r, dtype=float).ravel()))
    its = [0]

    def count(_):
        its[0] += 1

    x, info = sla.cg(A, b, rtol=tol, atol=0.0, maxiter=max_iter, M=M, callback=count)
    res = relative_residual(A, x, b)
    # the recurrence residual drifts from the true one; restart from x until it holds
    for _ in range(MAX_RESTARTS):
        if info != 0 or res <= tol or its[0] >= max_iter:
            break
        x, info = sla.cg(A, b, x0=x, rtol=tol, atol=0.0, maxiter=max_iter - its[0], M=M, callback=count)
        res = relative_residual(A, x, b)
    t = time.perf_counter() - t0
    if info != 0 or not res <= tol * (1 + 1e-6):
        raise IterativeFailure(f"PCG did not converge in {its[0]} iterations (residual {res:.3e})", res, its[0])
    backend = "cg+ic0" if shift == 0 else f"cg+ic0(shift={shift:g})"
    return _finish(sysobj, x, A, b, t, "pcg", its[0], tf, backend)


def solve(system, method: str = "direct", **kw) -> SolveReport:
    m = str(method).lower()
    if m == "direct":
        return solve_direct(system)
    if m == "pcg":
        return solve_pcg(system, **kw)
    raise ValueError(f"unknown solver {method!r}; expected one of {SOLVER_IDS}")


def energy_difference(K, x, y) -> float:
    """``||x - y||_K / ||x||_K``."""
    d = x - y
    nx = float(x @ (K @ x))
    return float(np.sqrt(max(d @ (K @ d), 0.0) / nx)) if nx > 0 else float(np.sqrt(max(d @ (K @ d), 0.0)))


# ---------------------------------------------------------------------------
# Matrix Market
# ---------------------------------------------------------------------------


def export_system(system, prefix) -> tuple[Path, Path]:
    """Write the eliminated system as ``<prefix>_A.mtx`` and ``<prefix>_b.mtx``."""
    A, b, _ = _unpack(system)
    prefix = Path(prefix)
    pa, pb = prefix.with_name(prefix.name + "_A.mtx"), prefix.with_name(prefix.name + "_b.mtx")
    scipy.io.mmwrite(pa, sp.coo_matrix(A), symmetry="symmetric" if _is_symmetric(A) else "general")
    scipy.io.mmwrite(pb, b.reshape(-1, 1))
    return pa, pb


def import_system(prefix) -> tuple[sp.csr_matrix, np.ndarray]:
    prefix = Path(prefix)
    A = sp.csr_matrix(scipy.io.mmread(prefix.with_name(prefix.name + "_A.mtx")))
    b = np.asarray(scipy.io.mmread(prefix.with_name(prefix.name + "_b.mtx"))).ravel()
    return A, b


def _is_symmetric(A) -> bool:
    d = abs(A - A.T)
    scale = abs(A).max() if A.nnz else 1.0
    return (d.max() if d.nnz else 0.0) <= 1e-12 * scale
