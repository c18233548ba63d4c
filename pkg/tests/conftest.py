"""Shared pytest configuration.

Keeping this file here puts tests/ on sys.path so the test-only
oracles module can be imported without packaging it.
"""
