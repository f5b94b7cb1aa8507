"""
Tests for countate.

"Testing is just paranoia with a purpose." — schema.cx
"""
