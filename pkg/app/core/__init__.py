"""
Core configuration and exception hierarchy.
"""

# Nothing is imported here to avoid circular imports
