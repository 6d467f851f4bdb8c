"""Dense linear-algebra kernels.

Schur-based Lyapunov and Riccati solvers, matrix exponential and principal
logarithm, and the mass/stiffness-scaled symmetric generalized eigensolver.
Everything works on dense ``numpy`` arrays; the intended problem sizes are a
few thousand unknowns at most.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla
from scipy.linalg import lapack

from .config import DEFAULTS
from .errors import (BranchCut, NonConvergence, NoStabilizingSolution, NotPD,
                     Overflow, SingularE, SingularSeparation)


@dataclass
class SchurForm:
    Q: np.ndarray
    T: np.ndarray

    @property
    def eigenvalues(self):
        return schur_eigenvalues(self.T)


@dataclass
class RiccatiSolution:
    X: np.ndarray
    residual_norm: float
    closed_loop_spectrum: np.ndarray


def as_matrix(A, name='matrix'):
    """Return `A` as a 2-D float/complex array with finite entries."""
    A = np.atleast_2d(np.asarray(A))
    if A.ndim != 2:
        raise ValueError(f'{name} must be two-dimensional')
    if not np.issubdtype(A.dtype, np.complexfloating):
        A = A.astype(float)
    if not np.all(np.isfinite(A)):
        raise ValueError(f'{name} has non-finite entries')
    return A


def _check_square(A, name='A'):
    if A.shape[0] != A.shape[1]:
        raise ValueError(f'{name} must be square, got {A.shape}')


def schur(A, output='real', tol=DEFAULTS):
    """Schur decomposition ``A = Q T Q^H``.

    Parameters
    ----------
    A
        Square matrix.
    output
        ``'real'`` for the quasi-triangular real form, ``'complex'`` for the
        triangular complex form.

    Returns
    -------
    SchurForm
    """
    A = as_matrix(A, 'A')
    _check_square(A)
    if A.shape[0] == 0:
        return SchurForm(np.eye(0), np.zeros((0, 0)))
    try:
        T, Q = spla.schur(A, output=output)
    except (spla.LinAlgError, ValueError) as exc:
        raise NonConvergence(f'QR iteration failed: {exc}') from exc
    return SchurForm(Q, T)


def schur_eigenvalues(T):
    """Eigenvalues read off the 1x1 / 2x2 diagonal blocks of a Schur factor."""
    n = T.shape[0]
    if np.iscomplexobj(T):
        return np.diag(T).copy()
    ev = np.empty(n, dtype=complex)
    i = 0
    while i < n:
        if i + 1 < n and T[i + 1, i] != 0.0:
            a, b, c, d = T[i, i], T[i, i + 1], T[i + 1, i], T[i + 1, i + 1]
            tr, det = (a + d) / 2, a * d - b * c
            disc = np.sqrt(complex(tr * tr - det))
            ev[i], ev[i + 1] = tr + disc, tr - disc
            i += 2
        else:
            ev[i] = T[i, i]
            i += 1
    return ev


def _check_separation(ev, tol):
    # lambda_i + lambda_j ~ 0 makes the Lyapunov operator singular
    scale = max(1.0, np.abs(ev).max(initial=0.0))
    gap = np.abs(ev[:, None] + ev[None, :]).min(initial=np.inf)
    if gap <= tol * scale:
        raise SingularSeparation(
            f'eigenvalues of A and -A^T nearly coincide (min |l_i + l_j| = {gap:.3e})')


def _lyap_from_schur(sf, W):
    Q, T = sf.Q, sf.T
    cplx = np.iscomplexobj(T) or np.iscomplexobj(W)
    if cplx:
        Q, T = Q.astype(complex), T.astype(complex)
        F = Q.conj().T @ W @ Q
        Y, scale, info = lapack.ztrsyl(T, T, -F, trana='N', tranb='C')
    else:
        F = Q.T @ W @ Q
        Y, scale, info = lapack.dtrsyl(T, T, -F, trana='N', tranb='T')
    if info < 0:
        raise ValueError(f'illegal argument {-info} to trsyl')
    Y = Y / scale
    X = Q @ Y @ Q.conj().T
    return (X + X.conj().T) / 2


def lyapunov_residual(A, X, W, E=None):
    """Frobenius norm of ``A X E^H + E X A^H + W``."""
    if E is None:
        R = A @ X + X @ A.conj().T + W
    else:
        AXE = A @ X @ E.conj().T
        R = AXE + AXE.conj().T + W
    return np.linalg.norm(R)


def solve_lyapunov(A, W, tol=DEFAULTS):
    """Solve ``A X + X A^T + W = 0`` by Bartels-Stewart back-substitution.

    For complex data the conjugate transpose is used throughout.

    Raises
    ------
    SingularSeparation
        If an eigenvalue pair of `A` sums to (nearly) zero.
    """
    A, W = as_matrix(A, 'A'), as_matrix(W, 'W')
    _check_square(A)
    if W.shape != A.shape:
        raise ValueError('W must have the shape of A')
    if A.shape[0] == 0:
        return np.zeros((0, 0))
    sf = schur(A, output='complex' if np.iscomplexobj(A) else 'real', tol=tol)
    _check_separation(sf.eigenvalues, tol.lyap_separation)
    return _lyap_from_schur(sf, W)


def _factor_E(E, tol):
    lu, piv = spla.lu_factor(E, check_finite=False)
    anorm = np.linalg.norm(E, 1)
    if np.any(np.diag(lu) == 0):
        raise SingularE('E is exactly singular')
    gecon = lapack.get_lapack_funcs('gecon', (lu,))
    rcond, info = gecon(lu, anorm, norm='1')
    if rcond == 0 or 1.0 / rcond > tol.cond_E_max:
        raise SingularE(f'E is numerically singular (condition estimate {1 / max(rcond, 1e-300):.2e})')
    return lu, piv


def solve_gen_lyapunov(A, E, W, tol=DEFAULTS):
    """Solve ``A X E^T + E X A^T + W = 0`` for invertible `E`.

    The equation is transformed to a standard one for ``A E^{-1}`` and the
    solution mapped back with ``E^{-1} (.) E^{-T}``.
    """
    A, E, W = as_matrix(A, 'A'), as_matrix(E, 'E'), as_matrix(W, 'W')
    _check_square(A)
    if E.shape != A.shape or W.shape != A.shape:
        raise ValueError('A, E and W must have equal shapes')
    if A.shape[0] == 0:
        return np.zeros((0, 0))
    lu = _factor_E(E, tol)
    # F = A E^{-1}  <=>  E^T F^T = A^T
    F = spla.lu_solve(lu, A.conj().T, trans=2 if np.iscomplexobj(E) else 1).conj().T
    Y = solve_lyapunov(F, W, tol=tol)
    Z = spla.lu_solve(lu, Y)
    X = spla.lu_solve(lu, Z.conj().T).conj().T
    return (X + X.conj().T) / 2


def solve_pr_riccati(A, B, C, R, tol=DEFAULTS):
    r"""Stabilizing solution of the positive-real Riccati equation.

    Solves

    .. math::
        A^T X + X A + (X B - C^T) R^{-1} (B^T X - C) = 0

    such that ``A + B R^{-1} (B^T X - C)`` is Hurwitz, using an ordered real
    Schur form of the associated Hamiltonian matrix.
    """
    A, B, C, R = (as_matrix(M, nm) for M, nm in zip((A, B, C, R), 'ABCR'))
    n = A.shape[0]
    try:
        Rc = spla.cho_factor(R)
    except spla.LinAlgError as exc:
        raise NotPD('R is not positive definite') from exc
    RiC = spla.cho_solve(Rc, C)
    RiBt = spla.cho_solve(Rc, B.T)
    At = A - B @ RiC
    H = np.block([[At, B @ RiBt], [-C.T @ RiC, -At.T]])
    try:
        T, Z, sdim = spla.schur(H, output='real', sort='lhp')
    except (spla.LinAlgError, ValueError) as exc:
        raise NonConvergence(str(exc)) from exc
    ev = schur_eigenvalues(T)
    on_axis = np.abs(ev.real) <= tol.riccati_imag_axis * np.maximum(1.0, np.abs(ev))
    if np.any(on_axis):
        raise NoStabilizingSolution(
            f'Hamiltonian has {on_axis.sum()} eigenvalue(s) on the imaginary axis')
    if sdim != n:
        raise NoStabilizingSolution(f'stable invariant subspace has dimension {sdim}, expected {n}')
    U1, U2 = Z[:n, :n], Z[n:, :n]
    try:
        X = np.linalg.solve(U1.T, U2.T).T
    except np.linalg.LinAlgError as exc:
        raise NoStabilizingSolution('stable subspace is not a graph subspace') from exc
    X = (X + X.T) / 2
    F = X @ B - C.T
    Res = A.T @ X + X @ A + F @ spla.cho_solve(Rc, F.T)
    scale = 2 * np.linalg.norm(A) * np.linalg.norm(X) + np.linalg.norm(F @ spla.cho_solve(Rc, F.T)) + 1e-300
    closed = A + B @ spla.cho_solve(Rc, F.T)
    return RiccatiSolution(X, np.linalg.norm(Res) / scale, np.linalg.eigvals(closed))


def matrix_exp(A, t=1.0):
    """``exp(A t)`` by scaling and squaring with a degree-13 Pade approximant."""
    A = as_matrix(A, 'A')
    _check_square(A)
    with np.errstate(over='ignore', invalid='ignore'):
        R = spla.expm(A * t)
    if not np.all(np.isfinite(R)):
        raise Overflow('matrix exponential overflowed')
    return R


def logm_triangular(T):
    """Principal logarithm of an upper triangular complex matrix."""
    L = spla.logm(T, disp=False)[0]
    return np.triu(L)


def matrix_log(A, tol=DEFAULTS):
    """Principal matrix logarithm via complex Schur form and inverse scaling and squaring.

    Raises
    ------
    BranchCut
        If an eigenvalue lies within ``tol.log_branch_cut`` of ``(-inf, 0]``.
    """
    A = as_matrix(A, 'A').astype(complex)
    _check_square(A)
    sf = schur(A, output='complex')
    ev = np.diag(sf.T)
    scale = max(1.0, np.abs(ev).max(initial=0.0))
    bad = (np.abs(ev.imag) <= tol.log_branch_cut * scale) & (ev.real <= tol.log_branch_cut * scale)
    if np.any(bad):
        raise BranchCut(f'eigenvalue {ev[bad][0]} on the closed negative real axis')
    L = logm_triangular(sf.T)
    return sf.Q @ L @ sf.Q.conj().T


def eig_sym_gen(K, M):
    """Mass/stiffness-scaled eigenbasis of the pencil ``(K, M)``.

    Returns ``omega`` (ascending) and ``X`` with ``X^T M X = diag(1/omega)``,
    ``X^T K X = diag(omega)``, so that ``K x_k = omega_k^2 M x_k``. Columns are
    signed such that their largest-magnitude entry is positive.
    """
    K, M = as_matrix(K, 'K'), as_matrix(M, 'M')
    for mat, nm in ((M, 'M'), (K, 'K')):
        try:
            np.linalg.cholesky(mat)
        except np.linalg.LinAlgError as exc:
            raise NotPD(f'{nm} is not positive definite') from exc
    w, X = spla.eigh(K, M)
    omega = np.sqrt(w)
    X = X / np.sqrt(omega)
    idx = np.argmax(np.abs(X), axis=0)
    X = X * np.sign(X[idx, np.arange(X.shape[1])])
    return omega, X
