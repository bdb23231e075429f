"""Evolutionary multi-objective search over cell-based CNN architectures.

Candidate networks are encoded as normal/reduction cell genomes, scored on
(reward, parameter count, FLOPs), ranked with NSGA-II, and evolved with
tournament selection, one-point crossover, per-gene mutation, and a small
elitist survival slot.  Evaluation is pluggable: built-in surrogates for
desk-scale work, or external worker processes speaking a newline-delimited
JSON protocol, with champion-to-population transfer between generations.
"""

from .arch_metrics import ArchStats, FidelityConfig, arch_stats, build_graph
from .evaluation import (
    AnalyticSurrogate,
    EvaluationRequest,
    EvaluationResult,
    NoisySurrogate,
    SurrogateParams,
    TableSurrogate,
    TransferContext,
    WorkerClient,
)
from .moea import (
    EvolutionParams,
    ObjectiveVector,
    RankedIndividual,
    crossover,
    crowding_distance,
    eepi_init,
    mutate,
    non_dominated_sort,
    normalize_objectives,
    survive,
    tournament_select,
)
from .orchestrator import (
    EvaluatorSpec,
    SearchConfig,
    export_evolution_csv,
    resume,
    run,
    run_report,
)
from .search_space import (
    ALL_OPERATORS,
    Chromosome,
    Gene,
    OperatorKind,
    decode_text,
    encode_text,
    random_chromosome,
    validate,
)
from .transfer import HyperparamRecord, decay_hyperparams, make_transfer_context, select_champion

__version__ = "0.1.0"
