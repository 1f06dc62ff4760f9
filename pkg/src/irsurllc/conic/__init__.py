"""Dense convex cone programming: problem container + interior-point solver."""

from .problem import (
    ConeBlock,
    ConicProblem,
    ConicProblemBuilder,
    ConicSolution,
    complex_from_embedded,
    free,
    hermitian_embed,
    nonneg,
    psd,
    smat,
    soc,
    svec,
    svec_dim,
)
from .solver import solve

__all__ = [
    "ConeBlock",
    "ConicProblem",
    "ConicProblemBuilder",
    "ConicSolution",
    "complex_from_embedded",
    "free",
    "hermitian_embed",
    "nonneg",
    "psd",
    "smat",
    "soc",
    "svec",
    "svec_dim",
    "solve",
]
