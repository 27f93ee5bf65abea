"""Dataset scanning: sidecar captions, resolution buckets, kind inference."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from ..errors import AtelierError
from ..imaging import read_png_header

DEFAULT_BUCKETS = (512, 768, 1024)


class RecordKind(Enum):
    FULL_COMPOSITION = "full"
    DETAIL_SHOT = "detail"


@dataclass
class DatasetRecord:
    image_path: Path
    caption: str
    bucket: int
    kind: RecordKind
    width: int
    height: int
    asset_tags: dict | None = None

    @property
    def record_id(self) -> str:
        return self.image_path.as_posix()


@dataclass
class ScanIssue:
    path: Path
    problem: str        # missing-caption | empty-caption | unreadable-image
    detail: str = ""


@dataclass
class ScanReport:
    root: Path
    records: list[DatasetRecord] = field(default_factory=list)
    issues: list[ScanIssue] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "root": self.root.as_posix(),
            "records": len(self.records),
            "issues": [{"path": i.path.as_posix(), "problem": i.problem,
                        "detail": i.detail} for i in self.issues],
        }


def assign_bucket(min_side: int, buckets=DEFAULT_BUCKETS) -> int:
    """Nearest configured resolution to the short side; ties take the smaller."""
    return min(buckets, key=lambda b: (abs(b - min_side), b))


def default_kind_rule(path: Path, root: Path) -> RecordKind:
    """Folder convention: any `detail` directory component marks a detail shot."""
    parts = {p.lower() for p in path.relative_to(root).parts[:-1]}
    return RecordKind.DETAIL_SHOT if "detail" in parts else RecordKind.FULL_COMPOSITION


def scan(root, kind_rule=None, buckets=DEFAULT_BUCKETS) -> ScanReport:
    """Pair every PNG under root with its `<stem>.txt` caption.

    Bad files become report issues; the scan itself never aborts. Records
    come back sorted by path so results are deterministic.
    """
    root = Path(root)
    report = ScanReport(root)
    rule = kind_rule or default_kind_rule
    for path in sorted(root.rglob("*.png"), key=lambda p: p.as_posix()):
        caption_path = path.with_suffix(".txt")
        if not caption_path.exists():
            report.issues.append(ScanIssue(path, "missing-caption"))
            continue
        caption = caption_path.read_text(encoding="utf-8").strip()
        if not caption:
            report.issues.append(ScanIssue(path, "empty-caption"))
            continue
        try:
            header = read_png_header(path)
        except AtelierError as exc:
            report.issues.append(ScanIssue(path, "unreadable-image", str(exc)))
            continue
        report.records.append(DatasetRecord(
            image_path=path, caption=caption,
            bucket=assign_bucket(min(header.width, header.height), buckets),
            kind=rule(path, root), width=header.width, height=header.height))
    return report
