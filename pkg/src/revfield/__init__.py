"""Kernel-smoothed space-time fields over versioned documents.

A versioned document (an ordered list of revisions) is represented as a
smooth field of local word distributions over a space-time rectangle.
Derivative norms of the field drive change visualization, boundary
detection, segmentation, and revision-outcome prediction.
"""

__version__ = "0.1.0"

from .boundary import (
    CellGrid,
    EdgeMap,
    Segmentation,
    build_cell_grid,
    detect_edges,
    hellinger,
    segment,
    spacetime_distance,
)
from .calculus import (
    Curve,
    ScalarField,
    component_gradient,
    derivative_norm_field,
    directional_change,
    integrated_change,
)
from .corpus import (
    ParseError,
    SyntheticConfig,
    TokenizerOptions,
    VersionedDocument,
    Vocabulary,
    export_json_lines,
    ingest,
    inject_undo_events,
    paper_fig1_config,
    synthesize,
    tokenize,
)
from .field import KernelSpec, SpaceTimeField, build_field, kernel_weight
from .learn import (
    EvalReport,
    LinearModel,
    evaluate,
    hinge_loss,
    logistic_loss,
    majority_baseline,
    predict,
    split,
    texttiling,
    train,
    undo_dataset,
    undo_features,
)
from .render import ImageSpec, to_pgm

__all__ = [
    "__version__",
    "CellGrid",
    "Curve",
    "EdgeMap",
    "EvalReport",
    "ImageSpec",
    "KernelSpec",
    "LinearModel",
    "ParseError",
    "ScalarField",
    "Segmentation",
    "SpaceTimeField",
    "SyntheticConfig",
    "TokenizerOptions",
    "VersionedDocument",
    "Vocabulary",
    "build_cell_grid",
    "build_field",
    "component_gradient",
    "derivative_norm_field",
    "detect_edges",
    "directional_change",
    "evaluate",
    "export_json_lines",
    "hellinger",
    "hinge_loss",
    "ingest",
    "inject_undo_events",
    "integrated_change",
    "kernel_weight",
    "logistic_loss",
    "majority_baseline",
    "paper_fig1_config",
    "predict",
    "segment",
    "spacetime_distance",
    "split",
    "synthesize",
    "texttiling",
    "to_pgm",
    "tokenize",
    "train",
    "undo_dataset",
    "undo_features",
]
