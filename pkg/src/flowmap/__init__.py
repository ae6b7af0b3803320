"""flowmap: packet streams -> flow multigraphs -> joint 2-D embeddings -> attribution.

The package is organized as a small numpy library:

* :mod:`flowmap.ingest` — canonical flow keys and 10-second window segmentation
* :mod:`flowmap.featurize` — 98-dim flow and 17-dim device feature vectors
* :mod:`flowmap.graphbuild` — multigraph snapshots and the chronological split
* :mod:`flowmap.diffmath` — taped reverse-mode autodiff over float64 arrays
* :mod:`flowmap.model` — encoder, edge fusion, projection heads, loss terms
* :mod:`flowmap.training` — kernel fitting, pair sampling, full-batch training
* :mod:`flowmap.explain` — Monte-Carlo Shapley attribution of coordinates
* :mod:`flowmap.metrics` — validity indices, F1 suites, drift report
* :mod:`flowmap.synthgen` — seeded synthetic traffic with a drift schedule
* :mod:`flowmap.cli` — the end-to-end pipeline commands
"""

from .ingest import (
    FlowKey,
    FlowRecord,
    FlowTable,
    PacketEvent,
    canonical_key,
    flush_all,
    ingest_packet,
    segment_stream,
)
from .featurize import (
    EDGE_FEATURE_DIM,
    NODE_FEATURE_DIM,
    NODE_FEATURE_NAMES,
    PortVocabulary,
    Standardizer,
    edge_feature_names,
    edge_features,
    node_features,
    port_category,
)
from .graphbuild import (
    GraphSnapshot,
    TemporalSplit,
    build_snapshot,
    load_snapshot,
    save_snapshot,
    split_flows,
    temporal_split,
)
from .model import (
    ModelConfig,
    ModelParams,
    TopoPair,
    encode_nodes,
    fuse_edges,
    init_params,
    kernel_p,
    load_checkpoint,
    loss_asym,
    loss_mse,
    loss_topo,
    project,
    save_checkpoint,
    total_loss,
)
from .training import (
    EmbedResult,
    TrainConfig,
    embed,
    fit_kernel_ab,
    fit_kernel_curve,
    sample_pairs,
    train,
)
from .explain import (
    AttributionResult,
    CoordinateModel,
    FeatureGroups,
    additivity_check,
    global_importance,
    mc_shap,
)
from .metrics import EvalReport, davies_bouldin, drift_report, f1_suite, silhouette
from .synthgen import MimicrySchedule, ScenarioConfig, drift_scenario, generate

__version__ = "0.1.0"
