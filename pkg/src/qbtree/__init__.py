"""Desk-scale simulation of quantum B+ trees, their dynamic variant and the quantum range tree."""
