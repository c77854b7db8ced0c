"""Dental identification by 3D-2D registration of intraoral scans to photographs."""

from .camera import CameraParams, IntrinsicConventions, project, project_all
from .errors import DataError, DentregError
from .ident import build_ranking, cmc_curve, rank_matrix, ranking_statistics, run_cohort
from .lr import LRModel, cllr, kde_pdf, likelihood_ratio
from .mesh import DentalMesh, LandmarkSet, load_landmarks, load_mesh, rasterize_silhouette
from .mvmo import OptimizerConfig, SearchSpace, best_of_restarts, optimize
from .pnpf import SolverOptions, reprojection_rmse, solve_pnpf
from .regfit import SegmentationImage, masked_dice_error, region_fitness

__all__ = [
    "CameraParams", "IntrinsicConventions", "project", "project_all",
    "DataError", "DentregError",
    "build_ranking", "cmc_curve", "rank_matrix", "ranking_statistics", "run_cohort",
    "LRModel", "cllr", "kde_pdf", "likelihood_ratio",
    "DentalMesh", "LandmarkSet", "load_landmarks", "load_mesh", "rasterize_silhouette",
    "OptimizerConfig", "SearchSpace", "best_of_restarts", "optimize",
    "SolverOptions", "reprojection_rmse", "solve_pnpf",
    "SegmentationImage", "masked_dice_error", "region_fitness",
]
__version__ = "0.1.0"
