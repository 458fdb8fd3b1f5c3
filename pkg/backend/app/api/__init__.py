"""
API Package Initialization
"""
