"""
Core numerics: lattice, operators, forcing models, solver, oracles and analysis.
"""
