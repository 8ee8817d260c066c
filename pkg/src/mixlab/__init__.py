"""Exact L^p mixing times, resistance bounds and spectral Gromov-Hausdorff
estimates for random walks on finite weighted graphs."""

__version__ = "0.1.0"
