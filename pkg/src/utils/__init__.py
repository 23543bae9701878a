"""Shared utilities: error handling, configuration and metrics."""
