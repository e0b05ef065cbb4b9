"""EBIC-guided variable selection for GLMs with non-canonical links."""

from .ebic import (
    GammaGrid,
    ModelScore,
    ebic_score,
    gamma_grid,
    log_choose,
    paper_final_gamma,
    resolve_gamma,
)
from .errors import (
    DataError,
    DomainError,
    EbicGlmError,
    EmptyCandidates,
    FoldTooSmall,
    InvalidArgs,
    InvalidDesign,
    InvalidRho,
    PathEmpty,
    RankDeficient,
    UnsupportedPair,
)
from .experiments import (
    CvLinkReport,
    ExperimentSummary,
    FinalReport,
    PdrFdr,
    cv_select_link,
    pdr_fdr,
    real_data_workflow,
    run_simulation_batch,
)
from .glm import (
    Dataset,
    DiagnosticReport,
    FitOptions,
    FitResult,
    HessianParts,
    ModelIndex,
    c6_diagnostics,
    fit_mle,
    hessian_parts,
    log_likelihood,
    score,
)
from .links import (
    Arcsin,
    Bernoulli,
    Cauchit,
    Cloglog,
    Family,
    Gamma,
    Identity,
    InversePower,
    Link,
    LinkFamily,
    Log,
    Logit,
    Poisson,
    Probit,
    compose_link_family,
    eval_mean,
    parse_family,
    parse_link,
    parse_link_family,
)
from .select import (
    ScreenResult,
    SelectConfig,
    SelectionPath,
    SelectionReport,
    forward_select,
    screen_mme,
    select_pipeline,
)
from .simgen import (
    SimDesign,
    SimReplicate,
    TrueModel,
    cloglog_response,
    design_for,
    divergent_pattern,
    generate_replicate,
)

__version__ = "0.1.0"
