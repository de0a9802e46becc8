"""Pydantic models and domain records for Sparse Market Lab."""
