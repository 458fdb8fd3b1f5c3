"""
Models Package Initialization

Pydantic request, response and report models.
"""
