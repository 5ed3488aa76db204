"""Sybil detection as low-pass filtering of label signals on social graphs."""

from .graph import Graph, LabelSet, ShiftKind, build_shift, from_edge_list
from .detectors import DetectorParams, ScoreVector, detect
from .evaluation import auc

__version__ = "0.1.0"

__all__ = ["Graph", "LabelSet", "ShiftKind", "build_shift", "from_edge_list",
           "DetectorParams", "ScoreVector", "detect", "auc"]
