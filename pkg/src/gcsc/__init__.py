"""Graph convolutional subspace clustering.

Closed-form EGCSC / EKGCSC self-representation on a kNN graph, plus the
preprocessing, spectral clustering and evaluation needed to run the
hyperspectral experiments end to end.
"""

from gcsc.errors import (
    ArgumentError,
    DataError,
    DegenerateDataError,
    FormatError,
    GcscError,
    NumericalError,
    StageError,
    StateError,
)
from gcsc.ingest import HsiCube, LabeledSamples, crop_subscene, load_cube, to_labeled_samples
from gcsc.preprocess import PcaModel, extract_patches, fit_pca, minmax_scale, transform_pca
from gcsc.graph import KnnGraph, build_knn, graph_embed, normalize_adjacency
from gcsc.solver import (
    CoefficientMatrix,
    KernelDescriptor,
    compute_kernel,
    egcsc_solve,
    ekgcsc_solve,
    gradient_residual,
    objective_value,
)
from gcsc.cluster import (
    AffinityMatrix,
    ClusterAssignment,
    build_affinity,
    render_cluster_map,
    spectral_cluster,
)
from gcsc.metrics import ClusterReport, evaluate, kappa, nmi, overall_accuracy

__version__ = "0.1.0"
