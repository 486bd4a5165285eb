"""Clearing-function release planning inside MRP, with a shop-floor simulator."""

__version__ = "0.1.0"
