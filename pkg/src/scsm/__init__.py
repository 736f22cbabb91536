"""Instrumental-variable estimation of cumulative exposure effects for
right-censored survival data.

The package estimates how an exposure shifts the hazard over time when
exposure and outcome share unmeasured confounders but a randomized (or
as-good-as-randomized) instrument is available.  The central object is
the cumulative exposure coefficient, fitted by a recursion over event
times (:func:`fit_recursive`), with influence-based standard errors,
multiplier resampling tests, summary effect measures, reference
estimators and a simulation laboratory built around it.

The sequential kernels run either as compiled Cython or as pure NumPy;
``scsm.BACKEND`` names the active one (select with ``SCSM_BACKEND``).
"""

from ._backend import BACKEND
from ._version import __version__
from .dataset import (
    COMPETING_RISK,
    SINGLE_CAUSE,
    EventGrid,
    SubjectRecord,
    SurvivalDataset,
    build_event_grid,
    load_csv,
)
from .errors import (
    BadStatusCode,
    ConfigError,
    CovariateInstrumentModel,
    DegenerateFirstStage,
    EmptyWindow,
    InputError,
    InvalidTime,
    LogisticNoConvergence,
    LogisticNonBinaryInstrument,
    MissingColumn,
    NoCompetingEvents,
    NoEvents,
    NoJumpsInWindow,
    NonBinaryExposure,
    NonFiniteValue,
    NumericalError,
    RankDeficientDesign,
    RankDeficientRiskSet,
    ScsmError,
    SingularSecondStage,
    TraceMismatch,
    WeakInstrument,
)
from .estimators import (
    EffectSummary,
    RecursionTrace,
    StepFunction,
    TwoStageFit,
    VolterraFit,
    constant_effect,
    fit_recursive,
    fit_volterra_binary,
    naive_aalen,
    piecewise_effect,
    two_stage_ls,
)
from .inference import (
    IidDecomposition,
    TestReport,
    VarianceBands,
    competing_risk_test,
    constant_effect_se,
    iid_decomposition,
    multiplier_draws,
    test_causal_null,
    test_constant_effect,
    test_piecewise_gof,
    variance_bands,
)
from .instrument import (
    InstrumentModelFit,
    InstrumentModelSpec,
    center_instrument,
    fit_instrument_model,
)
from .simulation import (
    EffectSchedule,
    SimConfig,
    SimReport,
    SimulatedData,
    generate,
    run_study,
)

__all__ = [
    "BACKEND",
    "__version__",
    # dataset
    "COMPETING_RISK",
    "SINGLE_CAUSE",
    "EventGrid",
    "SubjectRecord",
    "SurvivalDataset",
    "build_event_grid",
    "load_csv",
    # errors
    "BadStatusCode",
    "ConfigError",
    "CovariateInstrumentModel",
    "DegenerateFirstStage",
    "EmptyWindow",
    "InputError",
    "InvalidTime",
    "LogisticNoConvergence",
    "LogisticNonBinaryInstrument",
    "MissingColumn",
    "NoCompetingEvents",
    "NoEvents",
    "NoJumpsInWindow",
    "NonBinaryExposure",
    "NonFiniteValue",
    "NumericalError",
    "RankDeficientDesign",
    "RankDeficientRiskSet",
    "ScsmError",
    "SingularSecondStage",
    "TraceMismatch",
    "WeakInstrument",
    # estimators
    "EffectSummary",
    "RecursionTrace",
    "StepFunction",
    "TwoStageFit",
    "VolterraFit",
    "constant_effect",
    "fit_recursive",
    "fit_volterra_binary",
    "naive_aalen",
    "piecewise_effect",
    "two_stage_ls",
    # inference
    "IidDecomposition",
    "TestReport",
    "VarianceBands",
    "competing_risk_test",
    "constant_effect_se",
    "iid_decomposition",
    "multiplier_draws",
    "test_causal_null",
    "test_constant_effect",
    "test_piecewise_gof",
    "variance_bands",
    # instrument model
    "InstrumentModelFit",
    "InstrumentModelSpec",
    "center_instrument",
    "fit_instrument_model",
    # simulation
    "EffectSchedule",
    "SimConfig",
    "SimReport",
    "SimulatedData",
    "generate",
    "run_study",
]
