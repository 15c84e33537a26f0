"""Causal-model-driven test generation.

Discover a structural causal model from test executions, propose new tests
as interventions on that model, estimate their effect on the output before
running anything, and spend the execution budget only on the most promising
candidates.  Ships synthetic benchmark systems with known ground truth plus
baseline techniques and evaluation statistics for head-to-head comparison.
"""
from .baselines import ArtConfig, GaConfig, art, random_baseline, sbst_ml
from .citest import CITestResult, chi2_sf, ci_test, g2_test
from .data import (
    DataError,
    Dataset,
    Discretization,
    ROLE_INPUT,
    ROLE_OUTPUT,
    VariableSchema,
    append_record,
    discretize,
    load_dataset,
    load_schema,
    write_dataset,
    write_schema,
)
from .discovery import (
    DiscoveryConfig,
    SkeletonResult,
    discover_cpdag,
    discover_dag,
    meek_orient,
    orient_v_structures,
    pc_skeleton,
)
from .engine import (
    EngineConfig,
    EngineError,
    HypotheticalTest,
    SessionRecord,
    SessionReport,
    run_session,
)
from .graphs import (
    BackgroundKnowledge,
    Cpdag,
    CycleError,
    Dag,
    ExtensionError,
    GraphError,
    SeparationSets,
    cpdag_to_dag,
    d_separated,
    graph_fingerprint,
    graph_from_text,
    graph_to_dot,
    graph_to_text,
)
from .intervention import (
    EffectEstimate,
    EnumerationBoundError,
    InterventionError,
    InterventionSpec,
    RefutationReport,
    ate,
    do_surgery,
    estimate_effect,
    exact_interventional_dist,
    refute_placebo,
)
from .metrics import (
    ComparisonMatrix,
    DunnResult,
    FriedmanResult,
    dunn,
    efficiency_series,
    friedman,
    ncd,
    tsd_i,
    violations,
)
from .scm import Scm, ScmError, fit
from .seeding import derive_rng, derive_seed
from .sutbench import (
    ExecutionRecord,
    NoiseSpec,
    ResponseNode,
    SutError,
    SyntheticSut,
    available_benches,
    ground_truth_effect,
    load_bench,
    load_sut,
)

__version__ = "0.1.0"

__all__ = [
    "ArtConfig",
    "BackgroundKnowledge",
    "CITestResult",
    "ComparisonMatrix",
    "Cpdag",
    "CycleError",
    "Dag",
    "DataError",
    "Dataset",
    "Discretization",
    "DiscoveryConfig",
    "DunnResult",
    "EffectEstimate",
    "EngineConfig",
    "EngineError",
    "EnumerationBoundError",
    "ExecutionRecord",
    "ExtensionError",
    "FriedmanResult",
    "GaConfig",
    "GraphError",
    "HypotheticalTest",
    "InterventionError",
    "InterventionSpec",
    "NoiseSpec",
    "RefutationReport",
    "ResponseNode",
    "ROLE_INPUT",
    "ROLE_OUTPUT",
    "Scm",
    "ScmError",
    "SeparationSets",
    "SessionRecord",
    "SessionReport",
    "SkeletonResult",
    "SutError",
    "SyntheticSut",
    "VariableSchema",
    "append_record",
    "art",
    "ate",
    "available_benches",
    "chi2_sf",
    "ci_test",
    "cpdag_to_dag",
    "d_separated",
    "derive_rng",
    "derive_seed",
    "discover_cpdag",
    "discover_dag",
    "discretize",
    "do_surgery",
    "dunn",
    "efficiency_series",
    "estimate_effect",
    "exact_interventional_dist",
    "fit",
    "friedman",
    "g2_test",
    "graph_fingerprint",
    "graph_from_text",
    "graph_to_dot",
    "graph_to_text",
    "ground_truth_effect",
    "load_bench",
    "load_dataset",
    "load_schema",
    "load_sut",
    "meek_orient",
    "ncd",
    "orient_v_structures",
    "pc_skeleton",
    "random_baseline",
    "refute_placebo",
    "run_session",
    "sbst_ml",
    "tsd_i",
    "violations",
    "write_dataset",
    "write_schema",
]
