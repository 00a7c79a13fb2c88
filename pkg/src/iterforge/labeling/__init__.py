from .backends import HttpLabelerAdapter, SimLabeler, default_ground_truth
from .gateway import LabelingGateway, LabelTask

__all__ = [
    "HttpLabelerAdapter",
    "LabelTask",
    "LabelingGateway",
    "SimLabeler",
    "default_ground_truth",
]
