"""Right inverses of the divergence."""
