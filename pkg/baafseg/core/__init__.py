"""
Core functionality for baafseg.

This package contains settings, the exception hierarchy and small shared
utilities used throughout the project.
"""
