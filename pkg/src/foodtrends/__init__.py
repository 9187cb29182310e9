"""Geo-grid post harvesting, multimodal fusion classification, and food-trend reports."""

__version__ = "0.1.0"
