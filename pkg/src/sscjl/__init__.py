"""Sparse sign-consistent Johnson-Lindenstrauss embeddings and a Monte Carlo
lab for their concentration bounds."""

from .bounds import (
    SubGammaParams,
    hw_tail_bound,
    quadform_mgf_bound,
    quadform_subgamma_params,
    subgamma_tail_bound,
    subgauss_square_mgf_bound,
    subgaussian_tail_bound,
    variance_proxy,
)
from .errors import (
    CapacityError,
    DataError,
    DomainError,
    NormalizationError,
    ParameterError,
    ShapeError,
)
from .params import JLParams, compute_parameters, validate_params
from .sampler import SeedSpec, SSCMatrix, load_matrix, sample_matrix, sample_support, save_matrix
from .transform import (
    VectorBatch,
    apply,
    apply_batch,
    distortion_energy,
    gram_overlap,
    pairwise_distortion,
    quadratic_form_direct,
    read_vectors,
)

__version__ = "0.1.0"
