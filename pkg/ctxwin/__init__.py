"""Contextual detection geometry - windows, proposals and label assignment"""
from .geometry import Rect, iou, encode_deltas, decode_deltas
from .windows import Window, enumerate_windows, positive_windows, negative_windows
from .scales import ScaleSpec, build_scales, rescale_slice
from .proposals import (
    Proposal,
    LabeledProposal,
    ProposalSource,
    OracleProposalSource,
    oracle_proposals,
    assign_proposal_labels,
    aggregate_detections,
)
from .pipeline import SliceWindows, scan_windows, slice_windows

__all__ = [
    "Rect",
    "iou",
    "encode_deltas",
    "decode_deltas",
    "Window",
    "enumerate_windows",
    "positive_windows",
    "negative_windows",
    "ScaleSpec",
    "build_scales",
    "rescale_slice",
    "Proposal",
    "LabeledProposal",
    "ProposalSource",
    "OracleProposalSource",
    "oracle_proposals",
    "assign_proposal_labels",
    "aggregate_detections",
    "SliceWindows",
    "scan_windows",
    "slice_windows",
]
