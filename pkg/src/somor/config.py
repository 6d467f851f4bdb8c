"""Central numerical tolerances.

Every routine reads its defaults from :data:`DEFAULTS`; pass a modified copy
(``dataclasses.replace(DEFAULTS, ...)``) through the ``tol`` keyword to
override them locally.
"""
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # linalg
    schur_sweeps_per_dim: int = 30
    lyap_separation: float = 1e-12
    lyap_residual: float = 1e-10
    cond_E_max: float = 1e14
    riccati_imag_axis: float = 1e-10
    riccati_residual: float = 1e-8
    log_branch_cut: float = 1e-12
    # systems
    symmetry: float = 1e-12
    dense_linf_max_order: int = 600
    linf_rel_tol: float = 1e-10
    linf_max_iter: int = 50
    # somddpa
    modal_damping: float = 1e-8
    undamped: float = 1e-14
    # limited-bt
    psd_clamp: float = 1e-12
    unstable_pencil: float = 1e-12
    rank_deficient: float = 1e-14
    # prbt
    lure_eps: float = 1e-6
    lure_levels: int = 3
    lure_ratio: float = 10.0
    lure_residual: float = 1e-4
    unit_charval: float = 1e-6
    transform_cond_max: float = 1e10
    # hinf-greedy
    subspace_tol: float = 1e-10
    subspace_max_iter: int = 50
    refine_budget: int = 100


DEFAULTS = Tolerances()
