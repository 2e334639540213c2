"""Coastal urban digital twin toolkit.

LiDAR in; streamable LOD2 city tiles, flood-scenario exposure summaries, and
an HTTP scene service out.
"""

__version__ = "0.1.0"
