"""Corpus auditing, horizontal-flip expansion, curriculum manifests."""

from __future__ import annotations

from pathlib import Path

from ..errors import EmptyDataset, NoSingles
from ..imaging import decode_png, encode_png, flip_horizontal
from .records import DatasetRecord, RecordKind

DEFAULT_TARGET_RATIO = (72, 25)
CURRICULUM_GROUPS = ("singles", "pairs", "triples", "extras")
PAIRS_TARGET_FRACTION = 0.40
TRIPLES_TARGET_FRACTION = 0.20


def audit_ratio(records: list[DatasetRecord],
                target_ratio: tuple[int, int] = DEFAULT_TARGET_RATIO) -> dict:
    """Counts and percentages per kind against a full/detail target ratio."""
    if not records:
        raise EmptyDataset("audit needs at least one record")
    full = sum(1 for r in records if r.kind == RecordKind.FULL_COMPOSITION)
    detail = len(records) - full
    total = len(records)
    target_frac = target_ratio[0] / sum(target_ratio)
    full_frac = full / total

    warnings = []
    if full == 0 or detail == 0:
        warnings.append("one kind is entirely absent")
    if abs(full_frac - target_frac) > 0.05:
        warnings.append(
            f"full-composition share {full_frac:.1%} deviates from the "
            f"{target_ratio[0]}/{target_ratio[1]} target by more than 5 points")
    hflip_opportunity = not any(
        r.image_path.stem.endswith("_hflip") for r in records)

    return {
        "total": total,
        "counts": {"full": full, "detail": detail},
        "percentages": {"full": round(100.0 * full / total, 1),
                        "detail": round(100.0 * detail / total, 1)},
        "target_ratio": list(target_ratio),
        "deviation_from_target": round(full_frac - target_frac, 4),
        "hflip_doubling_opportunity": hflip_opportunity,
        "warnings": warnings,
    }


def hflip_expand(records: list[DatasetRecord], out_dir) -> list[DatasetRecord]:
    """Write mirrored copies + duplicated captions; returns originals + mirrors."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    expanded = list(records)
    for rec in records:
        img = decode_png(rec.image_path)
        flipped = flip_horizontal(img)
        out_image = out_dir / f"{rec.image_path.stem}_hflip.png"
        encode_png(flipped, out_image)
        out_caption = out_image.with_suffix(".txt")
        out_caption.write_text(rec.caption + "\n", encoding="utf-8")
        expanded.append(DatasetRecord(
            image_path=out_image, caption=rec.caption, bucket=rec.bucket,
            kind=rec.kind, width=rec.width, height=rec.height,
            asset_tags=rec.asset_tags))
    return expanded


def default_group_rule(record: DatasetRecord) -> str:
    parts = {p.lower() for p in record.image_path.parts}
    for group in CURRICULUM_GROUPS:
        if group in parts:
            return group
    return "extras"


def curriculum_manifest(records: list[DatasetRecord], group_rule=None) -> dict:
    """Staged training manifest: singles, then +pairs, then +triples/extras."""
    if not records:
        raise EmptyDataset("curriculum needs at least one record")
    rule = group_rule or default_group_rule
    groups: dict[str, list[DatasetRecord]] = {g: [] for g in CURRICULUM_GROUPS}
    for rec in records:
        groups[rule(rec)].append(rec)
    if not groups["singles"]:
        raise NoSingles("curriculum stage 1 (singles) would be empty")

    total = len(records)
    ids = {g: [r.record_id for r in rs] for g, rs in groups.items()}
    stages = [
        {"name": "singles", "step_range": [1000, 2000], "record_ids": ids["singles"]},
        {"name": "singles+pairs", "step_range": [2000, 6000],
         "record_ids": ids["singles"] + ids["pairs"]},
        {"name": "singles+pairs+triples+extras", "step_range": [6000, None],
         "record_ids": ids["singles"] + ids["pairs"] + ids["triples"] + ids["extras"]},
    ]
    fractions = {
        "pairs": round(len(groups["pairs"]) / total, 4),
        "triples": round(len(groups["triples"]) / total, 4),
        "pairs_target": PAIRS_TARGET_FRACTION,
        "triples_target": TRIPLES_TARGET_FRACTION,
    }
    warnings = []
    for g in ("pairs", "triples"):
        if not groups[g]:
            warnings.append(f"no {g}: later stages add nothing new")
    return {"stages": stages, "fractions": fractions, "warnings": warnings}
