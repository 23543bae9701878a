"""Direction catalogs, the two decomposition lemmas and the χ regularizer."""
