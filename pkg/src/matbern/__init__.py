"""Empirical Bernstein confidence sets for the mean of bounded symmetric matrices."""

__version__ = "0.1.0"

from .bounds import (
    BoundRequest,
    BoundResult,
    matrix_bennett_bernstein,
    matrix_hoeffding_radius,
    maurer_pontil_radius,
    meb1_bound,
    meb1_radius,
    meb1c_bound,
    meb1c_radius,
    minsker_radius,
    scalar_bennett_bernstein,
    sharp_mp_radius,
    two_sided,
)
from .errors import MatBernError
from .estimators import (
    MatrixSample,
    bessel_variance,
    paired_variance,
    rescale,
    sample_mean,
    weighted_mean,
)
from .matio import read_matrices, write_csv, write_text
from .seqeb import (
    GammaSchedule,
    SeqEBState,
    meb2_fixed_n,
    meb2_radius,
    monitor,
    seqeb_path,
    seqeb_update,
    time_uniform_radius,
)
from .symmat import SpectralDecomp, SymMat, eig_sym, expm, logm, spectral_norm, sym_from_dense

__all__ = [
    "BoundRequest", "BoundResult", "GammaSchedule", "MatBernError", "MatrixSample",
    "SeqEBState", "SpectralDecomp", "SymMat", "bessel_variance", "eig_sym", "expm", "logm",
    "matrix_bennett_bernstein", "matrix_hoeffding_radius", "maurer_pontil_radius",
    "meb1_bound", "meb1_radius", "meb1c_bound", "meb1c_radius", "meb2_fixed_n", "meb2_radius",
    "minsker_radius", "monitor", "paired_variance", "read_matrices", "rescale", "sample_mean",
    "scalar_bennett_bernstein", "seqeb_path", "seqeb_update", "sharp_mp_radius",
    "spectral_norm", "sym_from_dense", "time_uniform_radius", "two_sided", "weighted_mean",
    "write_csv", "write_text",
]
