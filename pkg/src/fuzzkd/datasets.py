"""Class-per-directory dataset ingestion, splitting and balancing.

A manifest lists every sample as (path, label, provenance) per split.
Splitting is stratified per class with largest-remainder rounding so the
split sizes always sum exactly; balancing oversamples minority classes up
to the majority count by cycling flip/rotate ops over seeded-random
originals. Test data is never augmented.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import imaging
from .seeding import subrng

SPLITS = ("train", "valid", "test")
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
BALANCE_OPS = ("rot90", "rot180", "rot270", "flip_h", "flip_v")


class DatasetError(ValueError):
    """Raised for empty classes, bad ratios or malformed manifests."""


@dataclass(frozen=True)
class SampleRecord:
    path: str
    label: str
    provenance: str = "original"  # or "augmented(<op>)"

    @property
    def augment_op(self) -> str | None:
        if self.provenance.startswith("augmented(") and self.provenance.endswith(")"):
            return self.provenance[len("augmented("):-1]
        return None


@dataclass
class DatasetManifest:
    classes: list[str]
    splits: dict[str, list[SampleRecord]]
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)
    seed: int = 0

    def counts(self, split: str) -> dict[str, int]:
        out = {c: 0 for c in self.classes}
        for rec in self.splits[split]:
            out[rec.label] += 1
        return out

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "ratios": list(self.ratios),
            "seed": self.seed,
            "splits": {
                name: [
                    {"path": r.path, "label": r.label, "provenance": r.provenance}
                    for r in recs
                ]
                for name, recs in self.splits.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        try:
            splits = {
                name: [SampleRecord(r["path"], r["label"], r["provenance"]) for r in recs]
                for name, recs in d["splits"].items()
            }
            return cls(list(d["classes"]), splits, tuple(d["ratios"]), int(d["seed"]))
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"malformed manifest: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))


def largest_remainder(n: int, ratios) -> list[int]:
    """Split n into len(ratios) integers proportional to ratios, exactly."""
    quotas = [n * r for r in ratios]
    base = [int(q) for q in quotas]
    short = n - sum(base)
    order = sorted(range(len(ratios)), key=lambda i: (quotas[i] - base[i], -i), reverse=True)
    for i in order[:short]:
        base[i] += 1
    return base


def _ratio_check(ratios) -> tuple[float, float, float]:
    r = tuple(float(x) for x in ratios)
    if len(r) != 3 or any(x < 0 for x in r) or abs(sum(r) - 1.0) > 1e-9:
        raise DatasetError(f"ratios must be 3 non-negative values summing to 1, got {ratios}")
    return r


def list_class_images(root: str | Path) -> dict[str, list[str]]:
    """Map class-directory names to sorted image paths under them."""
    rootp = Path(root)
    if not rootp.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    listing: dict[str, list[str]] = {}
    for cls_dir in sorted(p for p in rootp.iterdir() if p.is_dir()):
        files = sorted(
            str(p) for p in cls_dir.iterdir()
            if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
        )
        listing[cls_dir.name] = files
    if not listing:
        raise DatasetError(f"no class directories under {root}")
    return listing


def split_listing(
    listing: dict[str, list[str]], ratios=(0.7, 0.1, 0.2), seed: int = 0
) -> DatasetManifest:
    """Stratified 3-way split of an in-memory {class: paths} listing."""
    ratios = _ratio_check(ratios)
    empty = sorted(c for c, files in listing.items() if not files)
    if empty:
        raise DatasetError(f"classes with no images: {', '.join(empty)}")
    rng = subrng(seed, "split")
    classes = sorted(listing)
    splits: dict[str, list[SampleRecord]] = {name: [] for name in SPLITS}
    for cls in classes:
        files = list(listing[cls])
        perm = rng.permutation(len(files))
        shuffled = [files[i] for i in perm]
        sizes = largest_remainder(len(files), ratios)
        offset = 0
        for name, size in zip(SPLITS, sizes):
            for path in shuffled[offset:offset + size]:
                splits[name].append(SampleRecord(path, cls))
            offset += size
    return DatasetManifest(classes, splits, ratios, seed)


def split(root: str | Path, ratios=(0.7, 0.1, 0.2), seed: int = 0) -> DatasetManifest:
    """Scan a class-per-directory tree and split it."""
    return split_listing(list_class_images(root), ratios, seed)


def balance(manifest: DatasetManifest, target_split: str, seed: int | None = None) -> DatasetManifest:
    """Oversample minority classes of one split up to the majority count.

    Each synthetic sample cycles through the augment ops in fixed order and
    draws its source image at random (seeded) from the class originals.
    Only train/valid may be balanced.
    """
    if target_split not in ("train", "valid"):
        raise DatasetError(f"only train/valid can be balanced, not {target_split!r}")
    counts = manifest.counts(target_split)
    zero = sorted(c for c, n in counts.items() if n == 0)
    if zero:
        raise DatasetError(f"cannot balance classes with zero samples: {', '.join(zero)}")
    target = max(counts.values())
    rng = subrng(manifest.seed if seed is None else seed, f"balance.{target_split}")
    new_records = list(manifest.splits[target_split])
    by_class: dict[str, list[SampleRecord]] = {c: [] for c in manifest.classes}
    for rec in manifest.splits[target_split]:
        if rec.provenance == "original":
            by_class[rec.label].append(rec)
    for cls in manifest.classes:
        need = target - counts[cls]
        sources = by_class[cls]
        if need > 0 and not sources:
            raise DatasetError(f"class {cls!r} has no original samples to augment")
        for i in range(need):
            op = BALANCE_OPS[i % len(BALANCE_OPS)]
            src = sources[rng.integers(len(sources))]
            new_records.append(SampleRecord(src.path, cls, f"augmented({op})"))
    splits = dict(manifest.splits)
    splits[target_split] = new_records
    return DatasetManifest(manifest.classes, splits, manifest.ratios, manifest.seed)


def load_sample(rec: SampleRecord) -> imaging.ImageGrid:
    """Read a record's image, applying its augmentation op if any."""
    img = imaging.read_image(rec.path)
    op = rec.augment_op
    return imaging.augment(img, op) if op else img
