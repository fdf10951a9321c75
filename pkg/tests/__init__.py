"""
Tests Module
Unit and integration tests for event processor
"""
