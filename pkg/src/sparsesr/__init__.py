"""Coupled-dictionary image superresolution with pluggable sparse solvers."""

from .cli import BenchmarkReport, SynthReport, report_to_csv, run_benchmark, run_synth
from .dictionary import (
    CoupledDictionary,
    Dictionary,
    coupled_train,
    ksvd_train,
    load_dictionary,
    save_dictionary,
)
from .engine import QualityReport, UpscaleConfig, back_project, mse, psnr, upscale
from .image import (
    GRAD4_V1,
    FeatureSpec,
    PatchGrid,
    assemble_patches,
    bicubic_resize,
    degrade,
    extract_patches,
    lr_features,
    read_pgm,
    write_pgm,
)
from .linalg import Rng, SingularSystemError
from .solvers import SOLVER_NAMES, SolveStats, SolverConfig, SparseCode, soft_threshold, solve

__version__ = "0.1.0"

__all__ = [
    "BenchmarkReport",
    "CoupledDictionary",
    "Dictionary",
    "FeatureSpec",
    "GRAD4_V1",
    "PatchGrid",
    "QualityReport",
    "Rng",
    "SOLVER_NAMES",
    "SingularSystemError",
    "SolveStats",
    "SolverConfig",
    "SparseCode",
    "SynthReport",
    "UpscaleConfig",
    "assemble_patches",
    "back_project",
    "bicubic_resize",
    "coupled_train",
    "degrade",
    "extract_patches",
    "ksvd_train",
    "load_dictionary",
    "lr_features",
    "mse",
    "psnr",
    "read_pgm",
    "report_to_csv",
    "run_benchmark",
    "run_synth",
    "save_dictionary",
    "soft_threshold",
    "solve",
    "upscale",
    "write_pgm",
    "__version__",
]
