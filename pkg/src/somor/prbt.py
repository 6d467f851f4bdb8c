"""Positive-real balanced truncation with second-order structure recovery.

Pipeline for co-located velocity-output systems (``C_v = B_u^T``, ``C_p = 0``):

1. sign-symmetric first-order form (``A S = S A^T``),
2. Lur'e solution ``P`` via an extrapolated sequence of regularized
   positive-real Riccati equations,
3. balancing with signed characteristic values and truncation of equally many
   values of either signature,
4. a ``S``-unitary change of basis that zeroes the position-position block,
   after which ``M = I``, ``K = G G^T`` and ``D`` can be read off.
"""
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla
from scipy.linalg import lapack

from .config import DEFAULTS
from .errors import (InterlacingViolated, InvalidParams, LureResidualLarge,
                     NoStabilizingSolution, NotColocated, RankDeficient,
                     SignatureImbalance, TransformIllConditioned)
from .linalg import schur_eigenvalues, solve_pr_riccati
from .systems import SecondOrderSystem, passivity_margin, symmetric_form

DEFAULT_GRID = np.logspace(-4, 4, 1000)


@dataclass
class LureSolution:
    """Solution ``P`` of the Lur'e equations with diagnostics.

    ``constraint_residual`` is ``||P B - C^T|| / ||C^T||`` before the exact
    constraint projection is applied; ``epsilons`` is empty unless the
    regularized method was used.
    """
    P: np.ndarray
    constraint_residual: float
    epsilons: list
    riccati_residuals: list
    dual_defect: float = None
    method: str = 'deflation'


@dataclass
class SignedCharacteristicValues:
    """Characteristic values split by signature.

    ``neg`` and ``pos`` hold eigen-indices into ``values`` sorted by
    descending value.
    """
    values: np.ndarray
    signatures: np.ndarray
    neg: np.ndarray
    pos: np.ndarray
    vectors: np.ndarray = None

    @property
    def pairing(self):
        k = min(self.neg.size, self.pos.size)
        return np.column_stack([self.neg[:k], self.pos[:k]])


@dataclass
class StructuredFirstOrderROM:
    """Balanced and truncated first-order model.

    States are ordered ``(m, l, p | p, l, m)``: negative-signature states in
    descending value, then positive-signature states in ascending value, so
    the unit values that carry the input sit last.
    """
    A: np.ndarray
    B: np.ndarray
    m: int
    ell: int
    p: int
    kept_values: np.ndarray
    kept_signatures: np.ndarray
    truncated_sum: float
    meta: dict = field(default_factory=dict)

    @property
    def r(self):
        return self.m + self.ell + self.p

    @property
    def S(self):
        return np.r_[-np.ones(self.r), np.ones(self.r)]

    @property
    def C(self):
        return self.B.T


# Lur'e equations -------------------------------------------------------------

def _extrapolation_weights(h):
    # Lagrange weights for evaluating the interpolant of (h_i, P_i) at h = 0
    w = []
    for i, hi in enumerate(h):
        wi = 1.0
        for j, hj in enumerate(h):
            if j != i:
                wi *= -hj / (hi - hj)
        w.append(wi)
    return np.array(w)


def project_constraint(P, B, C):
    """Smallest symmetric update of `P` that enforces ``P B = C^T`` exactly."""
    Bp = np.linalg.solve(B.T @ B, B.T)
    E = C.T - P @ B
    Pn = P + E @ Bp + Bp.T @ E.T - Bp.T @ (B.T @ E) @ Bp
    return (Pn + Pn.T) / 2


def _lure_regularized(A, B, C, eps, tol):
    m = B.shape[1]
    epsilons = [eps * tol.lure_ratio ** k for k in range(tol.lure_levels - 1, -1, -1)]
    sols = [solve_pr_riccati(A, B, C, 2 * e * np.eye(m), tol) for e in epsilons]
    w = _extrapolation_weights(np.sqrt(epsilons))
    P = sum(wi * s.X for wi, s in zip(w, sols))
    return (P + P.T) / 2, epsilons, [s.residual_norm for s in sols]


def _lure_deflated(A, B, tol):
    """Lur'e solution for ``C = B^T`` from a Riccati equation of order ``N - m``.

    In an orthogonal basis ``U = [U1, U2]`` with ``range(U1) = range(B)`` the
    constraint ``P B = B`` forces ``U^T P U = diag(I, X)``; the Lur'e matrix
    inequality then reduces, by a Schur complement on the block
    ``R = -(A11 + A11^T) > 0``, to the Riccati equation

        A22^T X + X A22 + (X A21 + A12^T) R^{-1} (A21^T X + A12) = 0.

    The transmission zero of velocity outputs at ``s = 0`` gives its
    Hamiltonian ``2m`` eigenvalues at the origin (one Jordan pair per input).
    The required Lagrangian subspace is the stable invariant subspace plus
    the kernel of the Hamiltonian.
    """
    N, m = B.shape
    nr = N - m
    U, _ = np.linalg.qr(B, mode='complete')
    At = U.T @ A @ U
    A11, A12, A21, A22 = At[:m, :m], At[:m, m:], At[m:, :m], At[m:, m:]
    R = -(A11 + A11.T)
    try:
        Rc = spla.cho_factor(R)
    except spla.LinAlgError:
        return None
    RiA12 = spla.cho_solve(Rc, A12)
    RiA21t = spla.cho_solve(Rc, A21.T)
    F = A22 + A21 @ RiA12
    H = np.block([[F, A21 @ RiA21t], [-A12.T @ RiA12, -F.T]])
    T, Z = spla.schur(H, output='real')
    ev = schur_eigenvalues(T)
    mag = np.r_[np.sort(np.abs(ev)), np.inf]
    tau = np.sqrt(mag[2 * m - 1] * mag[2 * m]) if np.isfinite(mag[2 * m]) else np.inf
    cluster = np.abs(ev) <= tau
    stable = (ev.real < 0) & ~cluster
    if stable.sum() != nr - m or mag[2 * m] <= 1e3 * max(mag[2 * m - 1], 1e-300):
        raise NoStabilizingSolution(
            f'Hamiltonian spectrum does not split as {nr - m} stable + {2 * m} at the origin')
    for with_cluster in (False, True):
        sel = stable | cluster if with_cluster else stable
        T, Z, wr, wi, _, _, _, info = lapack.dtrsen(sel.astype(np.int32), T, Z, job='N')
        if info != 0:
            raise NoStabilizingSolution(f'Schur reordering failed (info={info})')
        ev = wr + 1j * wi
        cluster = np.abs(ev) <= tau
        stable = (ev.real < 0) & ~cluster
    k = nr - m
    Tc = T[k:nr + m, k:nr + m]
    _, _, Vt = np.linalg.svd(Tc)
    yc = Vt[-m:].T
    ys = -spla.solve(T[:k, :k], T[:k, k:nr + m] @ yc) if k else np.zeros((0, m))
    Y = np.hstack([Z[:, :k], Z[:, :nr + m] @ np.vstack([ys, yc])])
    try:
        X = np.linalg.solve(Y[:nr].T, Y[nr:].T).T
    except np.linalg.LinAlgError as exc:
        raise NoStabilizingSolution('Lagrangian subspace is not a graph subspace') from exc
    X = (X + X.T) / 2
    P = U @ spla.block_diag(np.eye(m), X) @ U.T
    res = A22.T @ X + X @ A22 + (X @ A21 + A12.T) @ spla.cho_solve(Rc, A21.T @ X + A12)
    rel = float(np.linalg.norm(res) / max(2 * np.linalg.norm(A22) * np.linalg.norm(X), 1e-300))
    return (P + P.T) / 2, rel


def solve_lure(ds, eps=DEFAULTS.lure_eps, tol=DEFAULTS, check_dual=False, method='deflation'):
    r"""Lur'e solution of a sign-symmetric system without feedthrough.

    Finds the minimal ``P >= 0`` with ``A^T P + P A = -K_c^T K_c`` and
    ``P B = C^T``.

    Parameters
    ----------
    ds
        Output of :func:`somor.systems.symmetric_form` (so ``C = B^T``).
    eps
        Smallest regularization for ``method='regularized'``.
    method
        ``'deflation'`` (default) solves an equivalent Riccati equation of
        order ``N - m`` without regularization; it needs
        ``B^T (A + A^T) B < 0``. ``'regularized'`` solves

        .. math::
            A^T P + P A + (P B - C^T)(2\varepsilon I)^{-1}(B^T P - C) = 0

        for ``eps * ratio**k``, ``k = levels-1, ..., 0``, and extrapolates
        polynomially in ``sqrt(eps)`` to zero, the rate at which the
        regularized solutions converge. Lossless systems (``A + A^T = 0``)
        return ``P = I``. If the damping block is singular, deflation falls
        back to regularization.
    check_dual
        Also solve the dual equation and record ``||Q - S P S|| / ||P||``.

    The constraint ``P B = C^T`` is finally imposed exactly by
    :func:`project_constraint`.

    Raises
    ------
    NoStabilizingSolution
    LureResidualLarge
        If ``P`` violates ``P B = C^T`` by more than ``tol.lure_residual``
        relative before the final projection.
    """
    A, B, C = np.asarray(ds.A, float), np.asarray(ds.B, float), np.asarray(ds.C, float)
    if method not in ('deflation', 'regularized'):
        raise InvalidParams(f'unknown Lure method {method!r}')
    if not eps > 0:
        raise InvalidParams('regularization eps must be positive')
    N = A.shape[0]
    Asym = A + A.T
    if not np.any(Asym) and np.array_equal(C, B.T):
        P, epsilons, rres, used = np.eye(N), [], [0.0], 'lossless'
    else:
        out = None
        if method == 'deflation' and np.array_equal(C, B.T):
            out = _lure_deflated(A, B, tol)
        if out is None:
            P, epsilons, rres = _lure_regularized(A, B, C, eps, tol)
            used = 'regularized'
        else:
            P, rel = out
            epsilons, rres, used = [], [rel], 'deflation'
    nC = np.linalg.norm(C)
    res = float(np.linalg.norm(P @ B - C.T) / nC) if nC > 0 else 0.0
    if res > tol.lure_residual:
        raise LureResidualLarge(f"Lur'e constraint residual {res:.3e}")
    sol = LureSolution(project_constraint(P, B, C), res, epsilons, rres, method=used)
    if check_dual:
        n = N // 2
        S = np.r_[-np.ones(n), np.ones(n)]
        dual = type(ds)(np.eye(N), A.T, C.T, B.T)
        Q = solve_lure(dual, eps, tol, method=method).P
        sol.dual_defect = float(np.linalg.norm(Q - S[:, None] * sol.P * S) / np.linalg.norm(sol.P))
    return sol


# balancing -------------------------------------------------------------------

def _psd_root(P):
    """``L`` with ``P = L^T L`` from the eigen-decomposition (negative part clamped)."""
    w, U = np.linalg.eigh((P + P.T) / 2)
    return (U * np.sqrt(np.clip(w, 0, None))).T


def pr_characteristic_values(L, S=None):
    """Signed characteristic values from a factor ``P = L^T L``.

    Values are ``|eig(L S L^T)|`` and signatures the signs of those
    eigenvalues; ``S`` defaults to ``diag(-I, I)`` of matching size.
    """
    L = np.atleast_2d(np.asarray(L, float))
    N = L.shape[1]
    if S is None:
        S = np.r_[-np.ones(N // 2), np.ones(N - N // 2)]
    lam, Y = np.linalg.eigh((L * S) @ L.T)
    vals, sg = np.abs(lam), np.sign(lam)
    neg, pos = np.flatnonzero(sg < 0), np.flatnonzero(sg > 0)
    neg = neg[np.argsort(-vals[neg], kind='stable')]
    pos = pos[np.argsort(-vals[pos], kind='stable')]
    return SignedCharacteristicValues(vals, sg, neg, pos, Y)


def pr_balance_truncate(ds, keep, P=None, tol=DEFAULTS):
    """Balance with the Lur'e solution and keep `keep` values of each signature.

    Parameters
    ----------
    ds
        Sign-symmetric first-order system.
    keep
        Number of retained states per signature.
    P
        Lur'e solution; computed with :func:`solve_lure` when omitted.

    Raises
    ------
    SignatureImbalance
        If fewer than `keep` values of either signature are available.
    """
    A, B = np.asarray(ds.A, float), np.asarray(ds.B, float)
    N = A.shape[0]
    n, m = N // 2, B.shape[1]
    if P is None:
        P = solve_lure(ds, tol=tol).P
    S = np.r_[-np.ones(n), np.ones(n)]
    L = _psd_root(P)
    cv = pr_characteristic_values(L, S)
    if keep < m:
        raise InvalidParams(f'need at least m={m} states per signature, got {keep}')
    if cv.neg.size < keep or cv.pos.size < keep:
        raise SignatureImbalance(f'{cv.neg.size} negative and {cv.pos.size} positive values, '
                                 f'cannot keep {keep} of each')
    idx = np.r_[cv.neg[:keep], cv.pos[:keep][::-1]]
    a, sg = cv.values[idx], cv.signatures[idx]
    if np.any(a <= tol.rank_deficient * max(1.0, cv.values.max())):
        raise RankDeficient('kept characteristic value is numerically zero')
    W = L.T @ cv.vectors[:, idx] / np.sqrt(a)
    V = (S[:, None] * W) * sg
    Ar, Br = W.T @ A @ V, W.T @ B
    trunc = float(cv.values[cv.neg[keep:]].sum() + cv.values[cv.pos[keep:]].sum())
    unit = np.abs(cv.values[cv.pos[:keep]] - 1) <= tol.unit_charval
    ell = max(int(unit.sum()) - m, 0)
    p = keep - m - ell
    rom = StructuredFirstOrderROM(Ar, Br, m, ell, p, a, sg, trunc)
    rom.meta['all_values_neg'] = cv.values[cv.neg]
    rom.meta['all_values_pos'] = cv.values[cv.pos]
    return rom


# structure recovery ----------------------------------------------------------

def hyperbolic_rotation(a, b, c):
    """``T = [[ch, sh], [sh, ch]]`` zeroing the (1,1) entry of ``T^-1 [[a, b], [-b, c]] T``.

    ``T^T diag(-1, 1) T = diag(-1, 1)`` and ``T^-1 = [[ch, -sh], [-sh, ch]]``;
    ``tau = tanh(t)`` solves ``c tau^2 - 2 b tau - a = 0``.

    Raises
    ------
    InterlacingViolated
        If no root with ``|tau| < 1`` exists.
    """
    if a == 0:
        return np.eye(2)
    if c == 0:
        roots = np.array([-a / (2 * b)]) if b != 0 else np.array([])
    else:
        disc = b * b + a * c
        roots = np.array([]) if disc < 0 else (b + np.array([1, -1]) * np.sqrt(disc)) / c
    roots = roots[np.abs(roots) < 1]
    if roots.size == 0:
        raise InterlacingViolated('no hyperbolic rotation zeroes the block', (0, 0))
    tau = roots[np.argmin(np.abs(roots))]
    ch = 1 / np.sqrt(1 - tau * tau)
    return np.array([[ch, tau * ch], [tau * ch, ch]])


def _neutral_direction(X, H, S):
    """Unit-S-norm vector ``u`` in ``range(X)`` (two columns) with ``u^T H u = 0``, ``u^T S u < 0``."""
    Gh, Gs = X.T @ H @ X, X.T @ S @ X
    Gh, Gs = (Gh + Gh.T) / 2, (Gs + Gs.T) / 2
    a, b, c = Gh[1, 1], 2 * Gh[0, 1], Gh[0, 0]
    cands = []
    if abs(a) > 1e-300:
        disc = b * b - 4 * a * c
        if disc >= 0:
            for t in ((-b + np.sqrt(disc)) / (2 * a), (-b - np.sqrt(disc)) / (2 * a)):
                cands.append(np.array([1.0, t]))
    else:
        if b != 0:
            cands.append(np.array([1.0, -c / b]))
        cands.append(np.array([0.0, 1.0]))
    best = None
    for w in cands:
        w = w / np.linalg.norm(w)
        g = w @ Gs @ w
        if g < 0 and (best is None or g < best[0]):
            best = (g, w)
    if best is None:
        return None
    return X @ best[1] / np.sqrt(-best[0])


def recovery_transform(Mb, tol=DEFAULTS):
    """``S``-unitary ``T`` (``T^T S T = S``) with zero leading block of ``T^-1 Mb T``.

    `Mb` is the ``2p x 2p`` block ``[[A33, A34], [-A34^T, A44]]`` and
    ``S = diag(-I_p, I_p)``. The first ``p`` columns of ``T`` span a subspace
    that is negative for ``S`` and neutral for ``S Mb``; each is taken from a
    complex eigenvector pair of `Mb` or from a pair of real eigenvectors of
    opposite ``S``-sign, matched by increasing eigenvalue magnitude. The
    remaining columns are an ``S``-orthonormal basis of the ``S``-orthogonal
    complement.

    Raises
    ------
    InterlacingViolated
        With the offending pair of real eigenvalue indices.
    """
    p = Mb.shape[0] // 2
    S = np.diag(np.r_[-np.ones(p), np.ones(p)])
    nrm = np.linalg.norm(Mb)
    if p == 0 or np.linalg.norm(Mb[:p, :p]) <= tol.symmetry * max(nrm, 1e-300):
        return np.eye(2 * p)
    if p == 1:
        return hyperbolic_rotation(Mb[0, 0], Mb[0, 1], Mb[1, 1])
    H = S @ Mb
    H = (H + H.T) / 2
    lam, Vv = np.linalg.eig(Mb)
    used = np.zeros(2 * p, bool)
    cols, reals = [], []
    for i in range(2 * p):
        if used[i]:
            continue
        if abs(lam[i].imag) > 1e-12 * max(1.0, abs(lam[i])):
            cost = np.abs(lam - lam[i].conjugate()) + np.where(used, np.inf, 0.0)
            cost[i] = np.inf
            j = int(np.argmin(cost))
            used[i] = used[j] = True
            u = _neutral_direction(np.column_stack([Vv[:, i].real, Vv[:, i].imag]), H, S)
            if u is None:
                raise InterlacingViolated(f'complex eigenvalue pair {i},{j} has no neutral direction',
                                          (i, j))
            cols.append(u)
        else:
            used[i] = True
            v = Vv[:, i].real
            v = v / np.linalg.norm(v)
            reals.append((lam[i].real, v, np.sign(v @ S @ v), i))
    negs = sorted((x for x in reals if x[2] < 0), key=lambda x: abs(x[0]))
    poss = sorted((x for x in reals if x[2] > 0), key=lambda x: abs(x[0]))
    if len(negs) != len(poss):
        raise InterlacingViolated(f'{len(negs)} negative and {len(poss)} positive real eigenvectors')
    for a, b in zip(negs, poss):
        u = _neutral_direction(np.column_stack([a[1], b[1]]), H, S)
        if u is None:
            raise InterlacingViolated(f'eigenvalues {a[0]:.6g} (S-negative) and {b[0]:.6g} '
                                      '(S-positive) do not interlace', (a[3], b[3]))
        cols.append(u)
    T1 = np.column_stack(cols)
    N2 = spla.null_space(T1.T @ S)
    G = N2.T @ S @ N2
    Lg = np.linalg.cholesky((G + G.T) / 2)
    T2 = spla.solve_triangular(Lg, N2.T, lower=True).T
    return np.column_stack([T1, T2])


def interlacing_holds(rom):
    """Whether the i-th kept negative value is below the i-th kept positive value (p-blocks)."""
    m, ell, p, r = rom.m, rom.ell, rom.p, rom.r
    neg = np.sort(rom.kept_values[m + ell:r])[::-1]
    pos = np.sort(rom.kept_values[r:r + p])[::-1]
    return bool(np.all(neg < pos))


def structure_recovery(rom, tol=DEFAULTS):
    """Second-order model ``(I, D_hat, G G^T, B_hat, 0, B_hat^T)`` from a structured ROM.

    Returns ``(sos, T)`` with ``T`` the transformation of the ``p``-blocks.
    Diagnostics (condition of ``T``, S-unitarity defect, residual
    position-position block, negative damping eigenvalues) are stored in
    ``sos.meta``.
    """
    m, ell, p, r = rom.m, rom.ell, rom.p, rom.r
    ni = np.arange(m + ell, r)
    pi = np.arange(r, r + p)
    bi = np.r_[ni, pi]
    Mb = rom.A[np.ix_(bi, bi)]
    T = recovery_transform(Mb, tol)
    Tf = np.eye(2 * r)
    Tf[np.ix_(bi, bi)] = T
    S = rom.S
    Tinv = (S[:, None] * Tf.T) * S
    A2 = Tinv @ rom.A @ Tf
    B2 = Tinv @ rom.B
    condT = float(np.linalg.cond(T)) if T.size else 1.0
    if condT > tol.transform_cond_max:
        warnings.warn(TransformIllConditioned(f'cond(T) = {condT:.2e}'), stacklevel=2)
    Sp = np.r_[-np.ones(p), np.ones(p)]
    unit_defect = float(np.abs((T.T * Sp) @ T - np.diag(Sp)).max()) if p else 0.0
    G = A2[:r, r:].T
    Dh = -A2[r:, r:]
    Dh = (Dh + Dh.T) / 2
    Bh = B2[r:]
    Kh = G @ G.T
    nA = np.linalg.norm(A2)
    dvals = np.linalg.eigvalsh(Dh)
    meta = {
        'method': 'prbt', 'r': int(r), 'm': int(m), 'ell': int(ell), 'p': int(p),
        'cond_T': condT, 'S_unitarity_defect': unit_defect,
        'position_block_defect': float(np.abs(A2[:r, :r]).max() / nA),
        'input_leak': float(np.abs(B2[:r]).max() / max(np.abs(B2).max(), 1e-300)),
        'D_hat_neg_eigs': [float(x) for x in dvals[dvals < 0]],
        'D_hat_max_eig': float(dvals[-1]) if dvals.size else 0.0,
        'interlacing': interlacing_holds(rom),
    }
    sos = SecondOrderSystem(np.eye(r), Dh, Kh, Bh, Cp=np.zeros((Bh.shape[1], r)),
                            Cv=Bh.T.copy(), meta=meta)
    return sos, T


# end-to-end ------------------------------------------------------------------

def prbt_reduce(sos, r, eps=DEFAULTS.lure_eps, fallback=False, grid=DEFAULT_GRID,
                tol=DEFAULTS):
    """Positive-real balanced truncation to second-order order `r`.

    Parameters
    ----------
    sos
        Co-located system (``C_v = B_u^T``, ``C_p = 0``) with ``M, K`` SPD.
    r
        Reduced order; ``r`` states of each signature are kept.
    fallback
        On :class:`InterlacingViolated` retry with ``r - 1, r - 2, ...``
        (reusing the Lur'e solution) and record the order actually used.
    grid
        Frequencies for the passivity check stored in the report.

    Returns
    -------
    rom : SecondOrderSystem
        ``rom.meta['report']`` holds the report (order, bound, negative
        damping eigenvalues, passivity margin, Lur'e residual, eps schedule).
    bound : float
        Twice the sum of the truncated characteristic values.
    """
    if not sos.colocated:
        raise NotColocated('prbt needs Cv = B^T and Cp = 0; use dilate_and_reduce')
    if not 1 <= r <= sos.n:
        raise InvalidParams(f'reduced order r={r} outside 1..{sos.n}')
    ds = symmetric_form(sos)
    lure = solve_lure(ds, eps, tol)
    order = r
    while True:
        try:
            srom = pr_balance_truncate(ds, order, P=lure.P, tol=tol)
            rom, T = structure_recovery(srom, tol)
            break
        except InterlacingViolated:
            if not fallback or order <= sos.m:
                raise
            order -= 1
    bound = 2 * srom.truncated_sum
    margin, worst = passivity_margin(rom, grid) if grid is not None else (None, None)
    rom.meta['report'] = {
        'order': int(order), 'requested_order': int(r), 'bound': bound,
        'D_hat_neg_eigs': rom.meta['D_hat_neg_eigs'], 'D_hat_max_eig': rom.meta['D_hat_max_eig'],
        'passivity_margin': margin, 'passivity_worst_omega': worst,
        'lure_residual': lure.constraint_residual, 'epsilon_schedule': lure.epsilons,
        'lure_method': lure.method,
        'cond_T': rom.meta['cond_T'], 'position_block_defect': rom.meta['position_block_defect'],
    }
    rom.meta['bound'] = bound
    return rom, bound


def dilate_and_reduce(sos, r, eps=DEFAULTS.lure_eps, fallback=False, grid=DEFAULT_GRID,
                      tol=DEFAULTS):
    """PRBT for velocity outputs ``y = C_v q'`` through the co-located extension.

    The extended input matrix ``[B_u, C_v^T]`` is compressed to full column
    rank, the co-located extension is reduced with :func:`prbt_reduce`, and
    the block from input ``u`` to output ``y`` is extracted.

    Returns ``(rom, bound, extended_rom)``.
    """
    if np.any(sos.Cp):
        raise InvalidParams('dilation needs position outputs to be zero (Cp = 0)')
    m = sos.m
    Bx = np.hstack([sos.B, sos.Cv.T])
    U, s, Zt = np.linalg.svd(Bx, full_matrices=False)
    k = int(np.sum(s > max(Bx.shape) * np.finfo(float).eps * s[0]))
    Bc = U[:, :k] * s[:k]
    Z = Zt[:k]
    ext = SecondOrderSystem(sos.M, sos.D, sos.K, Bc, Cp=np.zeros((k, sos.n)), Cv=Bc.T.copy())
    erom, bound = prbt_reduce(ext, r, eps, fallback, grid, tol)
    Bh = erom.B @ Z
    full_ext = SecondOrderSystem(erom.M, erom.D, erom.K, Bh, Cp=np.zeros((Bh.shape[1], erom.n)),
                                 Cv=Bh.T.copy(), meta=erom.meta)
    rom = SecondOrderSystem(erom.M, erom.D, erom.K, Bh[:, :m], Cp=np.zeros((sos.p, erom.n)),
                            Cv=Bh[:, m:].T.copy(), meta=dict(erom.meta, method='prbt-dilation'))
    return rom, bound, full_ext


def write_prbt_report(path, rom):
    with open(path, 'w') as fh:
        json.dump(rom.meta['report'], fh, indent=2, sort_keys=True)
        fh.write('\n')
