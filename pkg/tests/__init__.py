"""
Test suite for aoinf
"""
