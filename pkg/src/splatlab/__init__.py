"""splatlab: CPU reference renderer for Gaussian splats with window-tracked transmittance."""

from splatlab.splatmath import Eigen2, DegenerateSplatError, eigen2x2, erf, gaussian_moment_k

__all__ = [
    "Eigen2",
    "DegenerateSplatError",
    "eigen2x2",
    "erf",
    "gaussian_moment_k",
]

__version__ = "0.1.0"
