"""Distributed differentially private PCA and orthogonal tensor decomposition.

A library plus simulated three-role protocol (noise generator, sites,
aggregator) in which correlated zero-sum noise cancels at aggregation, so the
released estimate carries only pooled-level privacy noise.  Includes the
matrix (PCA) and tensor (latent variable moment) instantiations, their
conventional/local/pooled baselines, synthetic data generators, and an
experiment sweep CLI.
"""

from .dp import (
    Model,
    PrivacyLedger,
    PrivacySpec,
    RngStream,
    Sensitivity,
    avn_noise_tensor3,
    gaussian_std,
    iid_noise_matrix,
    iid_noise_tensor3,
    sensitivity_m2,
    sensitivity_m3,
    sym_noise_matrix,
    sym_noise_tensor3,
)
from .otd import (
    DecompositionError,
    LatentModel,
    MomentPair,
    OtdResult,
    RankDeficiencyError,
    agn,
    avn,
    cape_agn,
    conv_otd,
    mog_moments,
    nonprivate_otd,
    pool_moments,
    q_comp,
    recover_components,
    stm_moments,
    stm_postprocess,
    tensor_power_decompose,
    whiten,
)
from .pca import (
    PcaResult,
    SiteDataset,
    cape_pca,
    captured_energy,
    conv_pca,
    local_pca,
    nonprivate_pca,
    pooled_dp_pca,
    preprocess,
    principal_angle,
    second_moment,
    split_sites,
)
from .protocol import (
    InfeasibleNoiseError,
    InfeasiblePlanError,
    NoisePlan,
    ProtocolTranscript,
    cape_average,
    cape_plan,
    conv_average,
    gain,
    unequal_plan,
    weighted_cape_average,
    zero_sum_gaussian,
    zero_sum_shares,
)
from .tensors import (
    apply_Iuu,
    d_sym,
    multilinear3,
    outer3,
    sym_tensor_from_unique,
    tensor_norm,
    top_k_eigs,
    unique_from_sym,
    vectorize,
)

__version__ = "0.1.0"
