"""Budget-constrained black-box configuration tuning.

Explore a mixed-type knob space with Latin hypercube designs, exploit
promising regions with recursive random search, and account for every test
against a hard budget.  Systems plug in behind manipulator/workload
interfaces; calibrated synthetic surfaces make every claim checkable
against an exact grid oracle.
"""

from .analysis import (
    AnalysisError,
    BottleneckVerdict,
    ComparisonResult,
    ImprovementSummary,
    compare,
    identify_bottleneck,
    summarize,
)
from .harness import (
    FatalSutError,
    MetricBundle,
    SurfaceSut,
    SurfaceWorkload,
    SutError,
    SystemManipulator,
    TestOutcome,
    TuningBudget,
    WorkloadGenerator,
    evaluate,
    run_tuning,
    surface_pair,
)
from .sampling import SampleDesign, lhs, make_rng, rescale_design, uniform_in_box
from .search import (
    BaselineError,
    EvaluationError,
    LhsOptimizer,
    ProtocolError,
    RandomOptimizer,
    RrsOptimizer,
    RrsParams,
    Sample,
    TuningAbort,
    TuningReport,
    make_optimizer,
    n_explore,
    rrs_tune,
    tune,
)
from .space import (
    InvalidSettingError,
    Parameter,
    ParameterSpace,
    SpaceError,
    UnitBox,
    Violation,
    clip_box,
    from_unit,
    load_space,
    save_space,
    to_unit,
    validate,
)
from .surfaces import (
    OracleResult,
    SyntheticSurface,
    brute_force,
    get_surface,
    surface_catalog,
    surface_composed,
)
from .tuner import ConfigTuner

__version__ = "0.1.0"

__all__ = [
    "AnalysisError",
    "BaselineError",
    "BottleneckVerdict",
    "ComparisonResult",
    "ConfigTuner",
    "EvaluationError",
    "FatalSutError",
    "ImprovementSummary",
    "InvalidSettingError",
    "LhsOptimizer",
    "MetricBundle",
    "OracleResult",
    "Parameter",
    "ParameterSpace",
    "ProtocolError",
    "RandomOptimizer",
    "RrsOptimizer",
    "RrsParams",
    "Sample",
    "SampleDesign",
    "SpaceError",
    "SurfaceSut",
    "SurfaceWorkload",
    "SutError",
    "SyntheticSurface",
    "SystemManipulator",
    "TestOutcome",
    "TuningAbort",
    "TuningBudget",
    "TuningReport",
    "UnitBox",
    "Violation",
    "WorkloadGenerator",
    "brute_force",
    "clip_box",
    "compare",
    "evaluate",
    "from_unit",
    "get_surface",
    "identify_bottleneck",
    "lhs",
    "load_space",
    "make_optimizer",
    "make_rng",
    "n_explore",
    "rescale_design",
    "rrs_tune",
    "run_tuning",
    "save_space",
    "summarize",
    "surface_catalog",
    "surface_composed",
    "surface_pair",
    "to_unit",
    "tune",
    "uniform_in_box",
    "validate",
]
