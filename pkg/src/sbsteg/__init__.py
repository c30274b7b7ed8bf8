"""Frequency sub-band image steganography."""
