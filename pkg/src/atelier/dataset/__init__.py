"""Sidecar-caption dataset tooling."""

from .captions import CaptionTransformConfig, caption_transform, split_tokens
from .records import (DEFAULT_BUCKETS, DatasetRecord, RecordKind, ScanIssue,
                      ScanReport, assign_bucket, default_kind_rule, scan)
from .tools import (DEFAULT_TARGET_RATIO, audit_ratio, curriculum_manifest,
                    hflip_expand)

__all__ = [
    "DatasetRecord", "RecordKind", "ScanIssue", "ScanReport",
    "scan", "assign_bucket", "default_kind_rule", "DEFAULT_BUCKETS",
    "CaptionTransformConfig", "caption_transform", "split_tokens",
    "audit_ratio", "hflip_expand", "curriculum_manifest", "DEFAULT_TARGET_RATIO",
]
