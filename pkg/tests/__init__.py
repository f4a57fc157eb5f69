"""
Test suite for pmlab.
"""
