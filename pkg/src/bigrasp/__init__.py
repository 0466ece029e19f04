"""Bimanual dexterous grasp synthesis.

Region selection on the grasp wrench space, region-based two-hand
initialization, decoupled force-closure optimization, pre-grasp and squeeze
synthesis, analytic quality metrics, and a deterministic batch pipeline
behind a CLI and an HTTP service.
"""

__version__ = "0.1.0"
