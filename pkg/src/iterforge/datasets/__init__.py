from .ops import MergeStrategy, exclude, filter_snapshot, intersect, merge

__all__ = ["MergeStrategy", "exclude", "filter_snapshot", "intersect", "merge"]
