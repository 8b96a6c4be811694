"""
Sparse2Dense - Tests Package
Unit and integration tests.
"""
