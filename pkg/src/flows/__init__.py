"""Intermittent box flows, fast oscillations, shifts and scaling reports."""
