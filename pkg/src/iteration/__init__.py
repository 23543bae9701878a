"""Parameter ladder, iteration state, one step and diagnostics."""
