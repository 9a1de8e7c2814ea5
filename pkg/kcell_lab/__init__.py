"""K-cell mean width lab: Monte Carlo study of K-cells of isotropic Poisson hyperplane processes."""

__version__ = "1.0.0"
