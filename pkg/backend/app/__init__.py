"""
Sampling Kantorovich Thermography Toolkit - Backend Application

This package contains the enhancement engine, histogram segmentation,
energy index, benchmark and pipeline services together with their CLI
and FastAPI surfaces.
"""

__version__ = "1.0.0"
__author__ = "SK Thermography Team"
