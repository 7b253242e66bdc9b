"""
Verification checks
"""
