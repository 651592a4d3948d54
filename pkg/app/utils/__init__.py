"""
Logging setup and file exporters.
"""
