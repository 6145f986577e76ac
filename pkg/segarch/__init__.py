"""Segmentation architecture - segnet, slice detector, training and cascaded inference"""
from .config import SegNetConfig, DetectorConfig
from .segnet import SegNet, build_segnet, region_probs, nested_labels
from .detector import Detector, DetectorProposalSource, build_detector, detect_box, longest_slice_run
from .training import TrainReport, train_seg, train_detector, seg_samples, detector_samples
from .cascade import CascadeResult, infer_cascade, run_cascade, whole_z

__all__ = [
    "SegNetConfig",
    "DetectorConfig",
    "SegNet",
    "build_segnet",
    "region_probs",
    "nested_labels",
    "Detector",
    "DetectorProposalSource",
    "build_detector",
    "detect_box",
    "longest_slice_run",
    "TrainReport",
    "train_seg",
    "train_detector",
    "seg_samples",
    "detector_samples",
    "CascadeResult",
    "infer_cascade",
    "run_cascade",
    "whole_z",
]
