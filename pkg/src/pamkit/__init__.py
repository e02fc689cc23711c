"""Toolkit for passive acoustic monitoring: detect candidate sound events in
long field recordings, describe them with MFCC features, classify them with
small built-in models, evaluate against annotations and map call density
across a recorder array."""

__version__ = "0.1.0"
