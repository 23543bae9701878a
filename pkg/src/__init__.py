"""
Convex-Integration Workbench

A spectral workbench on the periodic 3-torus for the constructive steps of
convex integration for the viscous and resistive MHD system.
"""

__version__ = "1.0.0"
__author__ = "Convex-Integration Workbench Team"
__description__ = "Spectral convex-integration workbench for viscous-resistive MHD on T³"
