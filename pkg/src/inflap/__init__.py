"""
inflap - numerical laboratory for inhomogeneous infinity-Laplacian equations.
"""

__version__ = '0.1.0'
