"""The perturbation flow families and their assembly."""
