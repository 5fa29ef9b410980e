"""Random band matrices: sampling, Schur-complement resolvents and Monte Carlo diagnostics."""

from .ensemble import (BandMatrixSpec, BlockBandMatrix, BoxWigner, Deterministic, GaussianTriangular,
                       GaussianWigner, HolderWigner, ScalarDensity, Symmetry, UniformTriangular, density_ratio,
                       gaussian_band_spec, operator_norm_statistic, sample_block_band, sample_gaussian_band,
                       to_dense)
from .moments import (FitDegenerate, conditional_domination_check, decay_profile, fractional_moment, holder_gap,
                      layer_cake_moment, localization_length_scan, moment_sup_over_lambda, tail_probability)
from .resolvent import (Resolvent, SingularBlock, backward_ghat_chain, dense_resolvent_oracle, diag_block, entry,
                        forward_gamma_chain, offdiag_block)
from .spectra import (InsufficientStatistics, dos_histogram, eigen_decompose, eigenvector_correlator,
                      minami_pair_rate, rescale_near, sample_spectra, simplicity_check, spacing_distribution,
                      wegner_block_tail)

__version__ = "0.1.0"

__all__ = [
    "BandMatrixSpec",
    "BlockBandMatrix",
    "BoxWigner",
    "Deterministic",
    "FitDegenerate",
    "GaussianTriangular",
    "GaussianWigner",
    "HolderWigner",
    "InsufficientStatistics",
    "Resolvent",
    "ScalarDensity",
    "SingularBlock",
    "Symmetry",
    "UniformTriangular",
    "backward_ghat_chain",
    "conditional_domination_check",
    "decay_profile",
    "dense_resolvent_oracle",
    "density_ratio",
    "diag_block",
    "dos_histogram",
    "eigen_decompose",
    "eigenvector_correlator",
    "entry",
    "forward_gamma_chain",
    "fractional_moment",
    "gaussian_band_spec",
    "holder_gap",
    "layer_cake_moment",
    "localization_length_scan",
    "minami_pair_rate",
    "moment_sup_over_lambda",
    "offdiag_block",
    "operator_norm_statistic",
    "rescale_near",
    "sample_block_band",
    "sample_gaussian_band",
    "sample_spectra",
    "simplicity_check",
    "spacing_distribution",
    "tail_probability",
    "to_dense",
    "wegner_block_tail",
]
