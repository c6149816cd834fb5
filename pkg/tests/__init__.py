"""
Test package for the VBD Workbench.
"""
