"""Time partitions, space-time cutoffs and gap functions."""
