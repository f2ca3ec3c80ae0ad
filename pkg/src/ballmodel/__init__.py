"""Operator-model toolkit for the unit ball: colligations, Agler decompositions and row contractions."""
from .agler import (
    BigKernelFactor,
    ModelGeometry,
    agler_verify,
    big_kernel_eval,
    commutative_model_check,
    functional_model_verify,
    model_subspaces,
    nc_agler_verify,
    tcfm_from_X,
    v_isometry_check,
)
from .colligation import (
    Colligation,
    ColligationFlags,
    classify,
    colligation_equiv,
    transfer_eval,
    transfer_taylor,
)
from .errors import *  # noqa: F401,F403
from .matcore import Subspace, orthonormal_range, procrustes, span_closure, sqrtm_psd
from .rowmodel import (
    CharTriple,
    DefectData,
    MomentTable,
    RowContraction,
    char_eval,
    char_series,
    characteristic_triple,
    classify_row,
    coincidence,
    defects,
    equiv_intertwiner,
    expanded_moments,
    halmos,
    nc_char_moments,
    purity_check,
    spherical_example,
    triple_equiv,
)
from .series import (
    CommSeries,
    NcSeries,
    da_backward_shift,
    nc_resolvent_series,
    resolvent_taylor_comm,
    xn_coefficients,
)

__version__ = "0.1.0"
