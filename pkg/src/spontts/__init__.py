"""Spontaneous-style TTS adaptation at desk scale."""

__version__ = "0.1.0"
