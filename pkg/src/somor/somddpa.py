"""Dominant pole-pair reduction for modally damped second-order systems.

All modes are computed densely from the symmetric pencil ``(K, M)`` and
ranked by a residue-over-damping criterion; the reduced model is a one-sided
projection onto the dominant eigenvectors.
"""
import csv
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from .config import DEFAULTS
from .errors import InvalidParams, NotModallyDamped, UndampedMode
from .linalg import eig_sym_gen
from .systems import SecondOrderSystem


@dataclass
class ModalData:
    """Scaled modal basis and pole pairs.

    ``X^T M X = diag(1/omega)``, ``X^T K X = diag(omega)`` and
    ``X^T D X ~ diag(2 xi)``; ``off_diagonal`` is the relative size of the
    part of ``X^T D X`` that is discarded (zero for modally damped systems).
    """
    omega: np.ndarray
    xi: np.ndarray
    X: np.ndarray
    lambda_plus: np.ndarray
    lambda_minus: np.ndarray
    dominance: np.ndarray = None
    off_diagonal: float = 0.0

    @property
    def n(self):
        return self.omega.size


@dataclass
class PoleResidueModel:
    """``H(s) = sum_k R_k / ((s - lambda_k^+)(s - lambda_k^-))``."""
    lambda_plus: np.ndarray
    lambda_minus: np.ndarray
    residues: np.ndarray  # shape (r, p, m)

    def __call__(self, s):
        den = (s - self.lambda_plus) * (s - self.lambda_minus)
        return np.tensordot(1.0 / den, self.residues, axes=(0, 0))


def check_modal_damping(sos):
    """Relative commutator ``||D M^-1 K - K M^-1 D||_F / (||D||_F ||M^-1||_2 ||K||_F)``.

    Zero for Rayleigh damping; values below about 1e-10 mean the system is
    modally damped.
    """
    M, D, K = sos.M, sos.D, sos.K
    nD, nK = np.linalg.norm(D), np.linalg.norm(K)
    if nD == 0 or nK == 0:
        return 0.0
    lu = spla.lu_factor(M)
    MiK, MiD = spla.lu_solve(lu, K), spla.lu_solve(lu, D)
    comm = D @ MiK - K @ MiD
    nMi = 1.0 / spla.svdvals(M)[-1]
    return float(np.linalg.norm(comm) / (nD * nMi * nK))


def pole_pair(omega, xi):
    """Roots of ``l^2 + 2 omega xi l + omega^2`` as ``(lambda_plus, lambda_minus)``."""
    omega, xi = np.asarray(omega, float), np.asarray(xi, float)
    root = np.sqrt((xi * xi - 1).astype(complex))
    return -omega * xi + omega * root, -omega * xi - omega * root


def modal_decompose(sos, threshold=DEFAULTS.modal_damping, force=False):
    """Modal data of `sos`.

    Parameters
    ----------
    threshold
        Largest admissible :func:`check_modal_damping` value.
    force
        Proceed for non-modally damped systems, taking ``xi`` from the
        diagonal of ``X^T D X``.

    Raises
    ------
    NotModallyDamped
    NotPD
    """
    comm = check_modal_damping(sos)
    if comm > threshold and not force:
        raise NotModallyDamped(f'relative commutator {comm:.3e} exceeds {threshold:.1e}')
    omega, X = eig_sym_gen(sos.K, sos.M)
    XDX = X.T @ sos.D @ X
    dg = np.diag(XDX).copy()
    nrm = np.linalg.norm(XDX)
    off = 0.0 if nrm == 0 else float(np.linalg.norm(XDX - np.diag(dg)) / nrm)
    xi = np.maximum(dg / 2, 0.0)
    lp, lm = pole_pair(omega, xi)
    data = ModalData(omega, xi, X, lp, lm, off_diagonal=off)
    if sos.p and sos.m:
        data.dominance = _dominance(data, sos.B, sos.Cp)
    return data


def _dominance(modal, B, Cp, tol=DEFAULTS):
    Bm = modal.X.T @ B          # rows x_k^T B
    Cm = Cp @ modal.X           # columns C_p x_k
    dom = np.empty(modal.n)
    damp = (modal.lambda_plus.real * modal.lambda_minus.real)
    for k in range(modal.n):
        R = modal.omega[k] * np.outer(Cm[:, k], Bm[k])
        res = np.linalg.norm(R, 2)
        if abs(damp[k]) <= tol.undamped * max(1.0, modal.omega[k] ** 2):
            dom[k] = np.nan
        else:
            dom[k] = res / damp[k]
    return dom


def dominance_rank(modal, B, Cp):
    """Permutation (0-based) of modes by descending dominance.

    Ties are broken by ascending ``omega`` and then by index. Undamped modes
    have undefined dominance (stored as NaN), are reported through an
    :class:`UndampedMode` warning and ranked last.
    """
    dom = _dominance(modal, np.atleast_2d(B).reshape(modal.n, -1), np.atleast_2d(Cp))
    modal.dominance = dom
    undamped = np.isnan(dom)
    if undamped.any():
        warnings.warn(UndampedMode(f'modes {np.flatnonzero(undamped).tolist()} are undamped; '
                                   'ranked last'), stacklevel=2)
    key = np.where(undamped, 0.0, dom)
    idx = np.arange(modal.n)
    return np.lexsort((idx, modal.omega, -key, undamped))


def somddpa_reduce(sos, r, threshold=DEFAULTS.modal_damping, force=False):
    """Project onto the `r` most dominant modes.

    Returns
    -------
    rom : SecondOrderSystem
        ``(V^T M V, V^T D V, V^T K V, V^T B, C_p V, 0)``.
    modal_rom : PoleResidueModel
        The truncated pole-residue sum of the kept modes.
    modal : ModalData
        Full modal data, including dominance values.
    order : ndarray
        Dominance permutation of all modes.
    """
    if sos.p and np.any(sos.Cv):
        raise InvalidParams('dominance criterion needs position outputs only (Cv = 0)')
    if not 1 <= r <= sos.n:
        raise InvalidParams(f'reduced order r={r} outside 1..{sos.n}')
    modal = modal_decompose(sos, threshold, force)
    order = dominance_rank(modal, sos.B, sos.Cp)
    keep = order[:r]
    V = modal.X[:, keep]
    rom = SecondOrderSystem(V.T @ sos.M @ V, V.T @ sos.D @ V, V.T @ sos.K @ V, V.T @ sos.B,
                            Cp=sos.Cp @ V, Cv=np.zeros((sos.p, r)),
                            meta={'method': 'somddpa', 'r': int(r), 'modes': keep.tolist()})
    Bm, Cm = V.T @ sos.B, sos.Cp @ V
    R = np.stack([modal.omega[k] * np.outer(Cm[:, j], Bm[j]) for j, k in enumerate(keep)])
    return rom, PoleResidueModel(modal.lambda_plus[keep], modal.lambda_minus[keep], R), modal, order


def write_dominance_csv(path, modal, order):
    """One row per mode in ranking order."""
    with open(path, 'w', newline='') as fh:
        w = csv.writer(fh, lineterminator='\n')
        w.writerow(['rank', 'mode', 'omega', 'xi', 'lambda_plus_re', 'lambda_plus_im',
                    'lambda_minus_re', 'lambda_minus_im', 'dominance'])
        for rank, k in enumerate(order, start=1):
            lp, lm = modal.lambda_plus[k], modal.lambda_minus[k]
            vals = [modal.omega[k], modal.xi[k], lp.real, lp.imag, lm.real, lm.imag,
                    modal.dominance[k]]
            w.writerow([rank, int(k) + 1] + ['%.17g' % v for v in vals])
