"""gatemimic: structural mimicry synthesis and evaluation for gate-level netlists."""

from gatemimic.netlist import (
    BenchParseError,
    CycleError,
    GateType,
    Levelization,
    Netlist,
    NetlistError,
    Node,
    Port,
    TruthTableCapError,
    levelize,
    load_bench,
    parse_bench,
    simulate,
    truth_table,
    write_bench,
)
from gatemimic.covert import (
    CamoPort,
    CamouflagedNetlist,
    CovertCell,
    camo_from_dict,
    camo_to_dict,
    can_hide,
    decoy_camouflage,
    identity_camouflage,
    identity_cell,
    make_cell,
    views,
)
from gatemimic.partition import (
    Partition,
    PartitionConfig,
    PartitionError,
    extract_pieces,
    partition_pipeline,
    recombine,
)
from gatemimic.matching import (
    CostConfig,
    NodeMapping,
    deploy_covert,
    hungarian,
    match_graphs,
)
from gatemimic.nand_array import (
    PairDataset,
    SelectorNet,
    SynthesisResult,
    TrainConfig,
    TrainingDivergedError,
    build_dataset,
    synthesize,
)
from gatemimic.metrics import (
    DeceptionInput,
    OverheadReport,
    ResilienceReport,
    appearance_fidelity,
    decamo_resilience,
    deception_score,
    functional_accuracy,
    overheads,
)
from gatemimic.pipeline import PipelineConfig, pair_pieces, run_pipeline

__version__ = "0.1.0"
