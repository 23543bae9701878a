"""Exact MHD solves, residual stresses and gluing."""
