"""Neutral genealogies: forward, lookdown and completely neutral samplers,
their permutation coupling, and the statistics around identifying the base
path of the lookdown."""

__version__ = "0.1.0"

from .core import (
    SAMPLERS,
    CanonicalForest,
    FamilySpec,
    Genealogy,
    ModelSpec,
    VertexRef,
    asynchronous,
    build_lookdown,
    canonical_form,
    dumps_genealogy,
    exact_labelled_distribution,
    exact_unlabelled_distribution,
    loads_genealogy,
    moran,
    sample,
    sample_completely_neutral,
    sample_forward,
    synchronous,
    validate_spec,
)
from .coupling import CoupledPair, arrange, arrange_coupling, lookdown_coupling, scramble, uniformity_diagnostic
from .errors import *  # noqa: F401,F403
from .experiments import (
    detect_fixation,
    dichotomy_experiment,
    estimate_base_identification,
    exact_identification_probability,
    rank_recovery_by_extinction,
)
from .gw import OffspringDistribution, SpinalTree, sample_gw, sample_spinal, spine_diagnostics, spine_via_lookdown
from .harness import EstimateWithCI, TestReport, distribution_equality_test
from .sbo import (
    GenerationPartition,
    exact_sbo_distribution,
    size_biased_order_discovery,
    size_biased_order_scramble,
    size_biased_sample,
)
from .seeding import SeedSpec
from .stats import (
    CoalescentScale,
    ConcentrationReport,
    DescendantTable,
    ancestral_partition,
    coalescent_scale,
    concentration,
    descendant_table,
    monte_carlo_coalescence,
    pairwise_coalescence_probability,
)
