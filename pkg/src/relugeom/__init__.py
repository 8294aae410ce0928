"""Geometry of ReLU networks: region counting, manifold complexity and latent transport."""

__version__ = "0.1.0"

from ._validation import (ArchitectureError, DimensionError, NotConvergedError,  # noqa: E402
                          TrainingDivergedError)
from .autoencoder import ReluAutoencoder, TrainReport, hausdorff, homeomorphism_check_curve, train  # noqa: E402
from .complexity import ComplexityBound, cut_count, network_bound  # noqa: E402
from .manifolds import (PointCloud, Polyline, Verdict, can_encode, is_linear_rectifiable,  # noqa: E402
                        peano_curve, rl_complexity_polyline, spiral)
from .net import (ActivationPattern, Mlp, NetworkArch, TrainConfig, activation_pattern,  # noqa: E402
                  backprop_mse, compose, forward, init_mlp)
from .regions import (CellDecomposition, LinearRegion, count_regions_sampled,  # noqa: E402
                      enumerate_regions, refines)
from .transport import (OtSolveReport, SemiDiscreteOT, SourceDomain, ae_omt_generate,  # noqa: E402
                        kantorovich_potential, power_cells, solve_sdot, wasserstein2)

__all__ = [
    "ActivationPattern", "ArchitectureError", "CellDecomposition", "ComplexityBound",
    "DimensionError", "LinearRegion", "Mlp", "NetworkArch", "NotConvergedError",
    "OtSolveReport", "PointCloud", "Polyline", "ReluAutoencoder", "SemiDiscreteOT",
    "SourceDomain", "TrainConfig", "TrainReport", "TrainingDivergedError", "Verdict",
    "activation_pattern", "ae_omt_generate", "backprop_mse", "can_encode", "compose",
    "count_regions_sampled", "cut_count", "enumerate_regions", "forward", "hausdorff",
    "homeomorphism_check_curve", "init_mlp", "is_linear_rectifiable", "kantorovich_potential",
    "network_bound", "peano_curve", "power_cells", "refines", "rl_complexity_polyline",
    "solve_sdot", "spiral", "train", "wasserstein2",
]
