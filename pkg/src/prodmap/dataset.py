"""Product-pair datasets: loading, validation, synthesis, and stratified splits.

JSONL is the canonical on-disk form (one UTF-8 object per line) with fields
``base_title``, ``compared_title``, ``brand``, ``label``, ``reasoning`` and
``pair_id``; CSV maps the same headers 1:1.  All operations are pure functions
of their inputs and an explicit seed.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

SPLIT_NAMES = ("peft", "rl", "val", "test")


class DatasetError(ValueError):
    """Invalid dataset content, record, or split request."""


@dataclass(frozen=True)
class ProductPair:
    base_title: str
    compared_title: str
    brand: str | None = None
    pair_id: str = ""

    def __post_init__(self):
        if not self.base_title.strip() or not self.compared_title.strip():
            raise DatasetError("product titles must be non-empty after trimming")


@dataclass(frozen=True)
class LabeledPair:
    pair: ProductPair
    label: int
    reasoning: str | None = None

    def __post_init__(self):
        if (isinstance(self.label, bool) or not isinstance(self.label, int)
                or self.label not in (0, 1)):
            raise DatasetError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class SplitBundle:
    peft: list[LabeledPair]
    rl: list[LabeledPair]
    val: list[LabeledPair]
    test: list[LabeledPair]

    def as_dict(self) -> dict[str, list[LabeledPair]]:
        return {"peft": self.peft, "rl": self.rl, "val": self.val, "test": self.test}

    def sizes(self) -> dict[str, int]:
        return {name: len(split) for name, split in self.as_dict().items()}


@dataclass(frozen=True)
class DatasetStats:
    total: int
    positive_fraction: float
    brand_count: int
    per_split_positive_fraction: dict[str, float] = field(default_factory=dict)


def content_pair_id(base_title: str, compared_title: str, brand: str | None,
                    label: int, reasoning: str | None) -> str:
    """Stable identifier derived from record content, for records without one."""
    payload = "\x1f".join([base_title, compared_title, brand or "", str(label), reasoning or ""])
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:16]


def _record_to_labeled_pair(rec: dict, line_no: int) -> LabeledPair:
    for key in ("base_title", "compared_title", "label"):
        if key not in rec or rec[key] in (None, ""):
            raise DatasetError(f"line {line_no}: missing required field {key!r}")
    label = rec["label"]
    if isinstance(label, bool) or not isinstance(label, int) or label not in (0, 1):
        raise DatasetError(f"line {line_no}: label must be 0 or 1, got {label!r}")
    brand = rec.get("brand") or None
    reasoning = rec.get("reasoning") or None
    pair_id = rec.get("pair_id") or content_pair_id(
        rec["base_title"], rec["compared_title"], brand, label, reasoning)
    try:
        pair = ProductPair(rec["base_title"], rec["compared_title"], brand=brand, pair_id=pair_id)
        return LabeledPair(pair=pair, label=label, reasoning=reasoning)
    except DatasetError as exc:
        raise DatasetError(f"line {line_no}: {exc}") from exc


def _iter_jsonl(path: Path):
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {line_no}: malformed JSON ({exc.msg})") from exc
            if not isinstance(rec, dict):
                raise DatasetError(f"line {line_no}: expected a JSON object")
            yield line_no, rec


def _iter_csv(path: Path):
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            line_no = reader.line_num
            rec = {k: v for k, v in row.items() if v not in (None, "")}
            if "label" in rec:
                try:
                    rec["label"] = int(rec["label"])
                except ValueError:
                    raise DatasetError(
                        f"line {line_no}: label must be 0 or 1, got {row['label']!r}") from None
            yield line_no, rec


def load_dataset(path: str | Path, format: str = "jsonl") -> list[LabeledPair]:
    """Load and validate a dataset, preserving record order.

    Raises DatasetError naming the offending line for malformed records,
    out-of-range labels, and duplicate pair ids.
    """
    p = Path(path)
    if not p.exists():
        raise DatasetError(f"dataset file not found: {p}")
    if format not in ("jsonl", "csv"):
        raise DatasetError(f"unsupported format {format!r} (expected 'jsonl' or 'csv')")
    rows = _iter_jsonl(p) if format == "jsonl" else _iter_csv(p)

    out: list[LabeledPair] = []
    seen: dict[str, int] = {}
    for line_no, rec in rows:
        lp = _record_to_labeled_pair(rec, line_no)
        pid = lp.pair.pair_id
        if pid in seen:
            raise DatasetError(
                f"line {line_no}: duplicate pair_id {pid!r} (first seen on line {seen[pid]})")
        seen[pid] = line_no
        out.append(lp)
    return out


def write_dataset(path: str | Path, data: list[LabeledPair]) -> None:
    """Write a dataset as canonical JSONL."""
    p = Path(path)
    with p.open("w", encoding="utf-8") as fh:
        for lp in data:
            rec = {
                "pair_id": lp.pair.pair_id,
                "base_title": lp.pair.base_title,
                "compared_title": lp.pair.compared_title,
                "brand": lp.pair.brand,
                "label": lp.label,
                "reasoning": lp.reasoning,
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


# --- synthetic generation ----------------------------------------------------

@dataclass(frozen=True)
class SynthesisSpec:
    n: int
    positive_fraction: float = 0.706
    brand_count: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.n <= 0:
            raise DatasetError(f"n must be positive, got {self.n}")
        if not 0.0 <= self.positive_fraction <= 1.0:
            raise DatasetError(f"positive_fraction must be in [0, 1], got {self.positive_fraction}")
        if self.brand_count < 1:
            raise DatasetError(f"brand_count must be >= 1, got {self.brand_count}")


_SYLLABLES = ["ve", "lo", "mar", "tek", "nor", "ax", "zen", "qua", "fen", "dor",
              "sil", "pra", "gos", "ran", "bel", "cu", "ma", "ri", "tal", "bo"]

# (product types, model codes, strengths, sizes, counts) per family so the
# generated titles stay plausible within a category.
_PRODUCT_FAMILIES = [
    (
        ["vitamin d3", "multivitamin", "omega 3 fish oil", "protein powder",
         "collagen peptides", "magnesium citrate"],
        [],
        ["4000iu", "2000iu", "1000iu", "500mg", "1000mg", "750mg"],
        ["250g", "500g", "1kg"],
        ["120 tablets", "60 tablets", "90 capsules", "30 count", "60 count", "x 2", "x 3"],
    ),
    (
        ["sparkling water", "green tea", "cold brew coffee", "espresso pods",
         "olive oil", "rice crackers"],
        [],
        [],
        ["355ml", "500ml", "250ml", "1l", "2l", "250g", "500g"],
        ["24 cans", "12 cans", "30 count", "60 count", "x 6", "x 3", "2 pack"],
    ),
    (
        ["wireless earbuds", "usb-c cable", "power bank", "desk lamp",
         "phone case", "aa batteries", "bluetooth speaker"],
        ["X100", "X200", "X300", "V2", "V3", "MK4", "MK5", "S9", "S10",
         "PRO2", "PRO3", "Z50", "Z70", "A12", "A15"],
        ["10w", "20w", "65w"],
        [],
        ["2 pack", "3 pack", "10 pack", "x 2"],
    ),
    (
        ["face cream", "shampoo", "sunscreen", "hand soap", "laundry pods",
         "body lotion"],
        [],
        ["spf50", "spf30"],
        ["30ml", "90g", "250ml", "500ml", "1l"],
        ["2 pack", "3 pack", "x 2", "x 3", "30 count"],
    ),
]

_POSITIVE_DECOR = ["swiss-made", "imported", "original", "new packaging",
                   "premium", "hot deal", "official", "eco pack", "authentic",
                   "top seller", "korean", "italian", "free shipping"]

_BUNDLE_ADDONS = ["cooler bag gift set", "travel pouch set", "bonus refill pack",
                  "steel tumbler bundle", "mini sample kit"]


def _brand_names(rng: random.Random, count: int) -> list[str]:
    names: list[str] = []
    seen: set[str] = set()
    while len(names) < count:
        name = "".join(rng.choice(_SYLLABLES) for _ in range(rng.choice([2, 3]))).capitalize()
        if name not in seen:
            seen.add(name)
            names.append(name)
    return names


def _pick_other(rng: random.Random, pool: list[str], current: str) -> str:
    alternatives = [v for v in pool if v != current]
    return rng.choice(alternatives)


def _compose_title_parts(rng: random.Random, brand: str) -> dict:
    types, models, strengths, sizes, counts = rng.choice(_PRODUCT_FAMILIES)
    parts: dict = {
        "brand": brand,
        "type": rng.choice(types),
        "model": rng.choice(models) if models and rng.random() < 0.6 else None,
        "strength": rng.choice(strengths) if strengths and rng.random() < 0.6 else None,
        "size": rng.choice(sizes) if sizes and rng.random() < 0.7 else None,
        "count": rng.choice(counts) if counts and rng.random() < 0.8 else None,
        "_pools": {"model": models, "strength": strengths, "size": sizes, "count": counts},
    }
    if parts["size"] is None and parts["count"] is None:
        parts["count"] = rng.choice(counts)
    return parts


def _render_title(parts: dict, decor: list[str] = (), bundle: str | None = None) -> str:
    pieces = [parts["brand"], parts["type"]]
    for key in ("model", "strength", "size", "count"):
        if parts[key]:
            pieces.append(parts[key])
    pieces.extend(decor)
    title = " ".join(pieces)
    if bundle:
        title += f" + {bundle}"
    return title


def _make_positive(rng: random.Random, parts: dict) -> str:
    # Same sellable product: only non-essential descriptors are added.
    decor = rng.sample(_POSITIVE_DECOR, rng.choice([1, 2]))
    return _render_title(parts, decor=decor)


def _make_hard_negative(rng: random.Random, parts: dict) -> str:
    # Different sellable product: flip exactly one variant-critical token group.
    mutated = dict(parts)
    options = [key for key in ("count", "size", "model", "strength")
               if parts[key] and len(parts["_pools"][key]) > 1]
    options.append("bundle")
    choice = rng.choice(options)
    if choice == "bundle":
        return _render_title(mutated, bundle=rng.choice(_BUNDLE_ADDONS))
    mutated[choice] = _pick_other(rng, parts["_pools"][choice], parts[choice])
    return _render_title(mutated)


def synthesize_dataset(spec: SynthesisSpec) -> list[LabeledPair]:
    """Generate a deterministic labeled dataset of product-title pairs.

    Positives keep the sellable identity and add non-essential descriptors
    (origin, packaging, marketing words); hard negatives change exactly one
    variant-critical token (count, size, model code, strength) or append a
    bundle component.  Brands are assigned round-robin so every brand appears.
    """
    rng = random.Random(spec.seed)
    brands = _brand_names(rng, spec.brand_count)
    n_pos = round(spec.n * spec.positive_fraction)
    labels = [1] * n_pos + [0] * (spec.n - n_pos)
    rng.shuffle(labels)

    out: list[LabeledPair] = []
    for i in range(spec.n):
        brand = brands[i % spec.brand_count]
        parts = _compose_title_parts(rng, brand)
        base = _render_title(parts)
        if labels[i] == 1:
            compared = _make_positive(rng, parts)
        else:
            compared = _make_hard_negative(rng, parts)
        pair = ProductPair(base, compared, brand=brand, pair_id=f"syn-{i:06d}")
        out.append(LabeledPair(pair=pair, label=labels[i]))
    return out


# --- stratified splitting ----------------------------------------------------

def stratified_split(data: list[LabeledPair], ratios, seed: int) -> SplitBundle:
    """Split into four disjoint subsets, stratified jointly by (brand, label).

    Within each stratum counts are allocated proportionally with
    largest-remainder rounding; fractional remainders are carried across
    strata (processed in label-major order) so that global split sizes land
    within one item of ``n * ratio`` and per-split label balance tracks the
    global label fraction.  Membership is shuffled per stratum under ``seed``;
    allocation counts do not depend on the seed.
    """
    if not data:
        raise DatasetError("cannot split an empty dataset")
    ratios = [float(r) for r in ratios]
    if len(ratios) != len(SPLIT_NAMES):
        raise DatasetError(f"expected {len(SPLIT_NAMES)} ratios, got {len(ratios)}")
    if any(r < 0 for r in ratios):
        raise DatasetError("ratios must be nonnegative")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DatasetError(f"ratios must sum to 1 within 1e-9, got {sum(ratios)!r}")

    seen: set[str] = set()
    strata: dict[tuple[int, str], list[LabeledPair]] = {}
    for lp in data:
        pid = lp.pair.pair_id
        if pid in seen:
            raise DatasetError(f"duplicate pair_id {pid!r} in split input")
        seen.add(pid)
        strata.setdefault((lp.label, lp.pair.brand or ""), []).append(lp)

    rng = random.Random(seed)
    carry = [0.0] * len(ratios)
    assigned: list[list[LabeledPair]] = [[] for _ in ratios]

    for key in sorted(strata):
        members = strata[key]
        rng.shuffle(members)
        m = len(members)
        quotas = [m * r + c for r, c in zip(ratios, carry)]
        counts = [math.floor(q) for q in quotas]
        leftover = m - sum(counts)
        order = sorted(range(len(ratios)), key=lambda j: (-(quotas[j] - counts[j]), j))
        for j in order[:leftover]:
            counts[j] += 1
        # A carried remainder can push a small-ratio quota below zero; repair by
        # moving a unit from the most over-allocated split.
        while any(c < 0 for c in counts):
            neg = min(range(len(counts)), key=lambda j: (counts[j], j))
            donor = max((j for j in range(len(counts)) if counts[j] > 0),
                        key=lambda j: (counts[j] - quotas[j], -j))
            counts[neg] += 1
            counts[donor] -= 1
        carry = [q - c for q, c in zip(quotas, counts)]
        pos = 0
        for j, c in enumerate(counts):
            assigned[j].extend(members[pos:pos + c])
            pos += c

    return SplitBundle(*assigned)


def dataset_stats(data: list[LabeledPair], bundle: SplitBundle | None = None) -> DatasetStats:
    """Exact counts and label/brand statistics; positive_fraction is 0 for empty input."""
    total = len(data)
    positives = sum(lp.label for lp in data)
    brands = {lp.pair.brand for lp in data if lp.pair.brand}
    per_split: dict[str, float] = {}
    if bundle is not None:
        for name, split in bundle.as_dict().items():
            pos = sum(lp.label for lp in split)
            per_split[name] = pos / len(split) if split else 0.0
    return DatasetStats(
        total=total,
        positive_fraction=positives / total if total else 0.0,
        brand_count=len(brands),
        per_split_positive_fraction=per_split,
    )
