"""Functional autoregressive surrogate modeling of dynamical systems.

The pipeline regresses the next output sample on temporal features of sliding
windows over the exogenous inputs and the past output, instead of on raw
lags: windows are compressed per channel (principal components by default),
expanded into sparse polynomial regressors, and solved with a least-angle
path whose stopping iteration is chosen by closed-loop forecast error rather
than one-step-ahead fit. Classical lag-based models are the identity-transform
configuration of the same machinery.
"""

from .basis import (
    MultiIndexSet,
    RegressorMatrix,
    evaluate_regressors,
    evaluate_single,
    generate_multi_indices,
)
from .features import (
    FeatureMatrix,
    IdentityTransform,
    PcaTransform,
    apply_all,
    apply_single,
    apply_transform,
    explained_variance_curve,
    fit_identity,
    fit_pca,
)
from .metrics import (
    ErrorReport,
    build_report,
    mean_nmse,
    nmse,
    peak_error,
    survival_curve,
)
from .model import (
    FittedModel,
    ForecastResult,
    ModelConfig,
    TransformSpec,
    adaptive_search,
    classical_config,
    fit,
    forecast,
    load_model,
    predict_osa,
    save_model,
)
from .regression import LarsPath, SparseCoefficients, hybrid_refit, lars_path, ols_solve
from .simulate import (
    ExcitationParams,
    OscillatorParams,
    ShearBuildingParams,
    SimulationError,
    generate_excitation,
    modal_analysis,
    simulate_building,
    simulate_oscillator,
)
from .timeseries import (
    ExperimentalDesign,
    SamplingGrid,
    Trajectory,
    concat_designs,
    load_csv,
    load_design,
    resample,
    save_csv,
    split_design,
    write_design,
)
from .windowing import (
    InformationMatrix,
    LagSpec,
    MemoryConfig,
    build_information_matrix,
    stack_design,
    subsample_rows,
)

__version__ = "0.1.0"
