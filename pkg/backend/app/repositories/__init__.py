"""Repositories package - file storage layer for Sparse Market Lab.

This package reads and writes result tables, run traces, rosters and
program files. Repositories only convert between files and domain objects.

Repositories MUST NOT contain simulation logic or summary calculations.
They MUST NOT import FastAPI dependencies or service layer code.
"""
