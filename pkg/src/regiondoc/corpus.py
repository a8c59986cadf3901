"""Synthetic annotated document pages.

Pages are rendered with the built-in 5x7 bitmap font on a white background,
so word boxes, texts, entities and class labels are exact ground truth.
Generation is a pure function of (seed, index, spec); persistence uses
binary PPM (P6) plus JSONL annotations so round trips are bit-exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, FormatError, IntegrityError
from .font5x7 import GLYPH_ADVANCE, GLYPH_HEIGHT, GLYPHS, text_nominal_size

DEFAULT_CHARSET = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789"

# Layout families, keyed by class label. Each produces a visually distinct
# page structure so the class is recoverable from pixels alone.
FAMILY_NAMES = ("flow", "keyvalue", "grid", "list")
ENTITY_LABEL_NAMES = ("title", "key", "value", "item")

_MAX_PLACEMENT_ATTEMPTS = 200

Box = tuple[int, int, int, int]


@dataclass(frozen=True)
class WordAnnotation:
    box: Box  # (x0, y0, x1, y1), half-open, tight around the ink
    text: str
    conf: float = 1.0


@dataclass(frozen=True)
class EntityAnnotation:
    box: Box
    label: int
    word_indices: tuple[int, ...]


@dataclass
class DocumentSample:
    image: np.ndarray  # (H, W, 3) uint8
    words: list[WordAnnotation]
    entities: list[EntityAnnotation]
    class_label: int


@dataclass(frozen=True)
class CorpusSpec:
    """Layout configuration for the generator.

    `word_bank`, when set, makes the text at each layout slot a fixed
    function of (family, line, position) so masked words stay predictable
    from the visible page; otherwise texts are i.i.d. random strings.
    """

    height: int = 256
    width: int = 256
    word_count: tuple[int, int] = (15, 30)
    scale: tuple[int, int] = (1, 2)
    num_classes: int = 4
    num_entity_labels: int = 4
    charset: str = DEFAULT_CHARSET
    word_len: tuple[int, int] = (2, 6)
    word_bank: tuple[str, ...] | None = None
    margin: int = 8

    def validate(self) -> None:
        for name, dim in (("height", self.height), ("width", self.width)):
            if dim < 64 or dim % 32 != 0:
                raise ConfigurationError(
                    f"page {name} must be >= 64 and divisible by 32, got {dim}"
                )
        if not 1 <= self.num_classes <= len(FAMILY_NAMES):
            raise ConfigurationError(
                f"num_classes must be in [1, {len(FAMILY_NAMES)}], got {self.num_classes}"
            )
        if self.num_entity_labels < 1:
            raise ConfigurationError("num_entity_labels must be >= 1")
        if self.word_count[0] < 1 or self.word_count[0] > self.word_count[1]:
            raise ConfigurationError(f"bad word_count range {self.word_count}")
        if self.scale[0] < 1 or self.scale[0] > self.scale[1]:
            raise ConfigurationError(f"bad scale range {self.scale}")
        bad = set(self.charset) - set(GLYPHS)
        if bad:
            raise ConfigurationError(f"charset characters missing from font: {sorted(bad)}")
        if self.word_bank is not None:
            if not self.word_bank:
                raise ConfigurationError("word_bank must be non-empty when given")
            for w in self.word_bank:
                if not w or set(w) - set(self.charset):
                    raise ConfigurationError(f"word_bank entry {w!r} outside charset")


@dataclass
class CorpusManifest:
    root: Path
    count: int
    charset: str
    class_names: list[str]
    entity_label_names: list[str]
    seed: int


class LayoutError(RuntimeError):
    """A word could not be placed within the bounded number of attempts."""


@dataclass(frozen=True)
class _Placed:
    text: str
    x: int
    y: int
    scale: int
    gray: int
    group: int
    group_label: int


def _pick_text(spec: CorpusSpec, rng: np.random.Generator, family: int, line: int,
               pos: int, retry: int = 0) -> str:
    if spec.word_bank is not None:
        key = (family * 53 + line) * 67 + pos * 31 + retry * 13
        return spec.word_bank[key % len(spec.word_bank)]
    n = int(rng.integers(spec.word_len[0], spec.word_len[1] + 1))
    chars = rng.integers(0, len(spec.charset), size=n)
    return "".join(spec.charset[c] for c in chars)


def _layout(spec: CorpusSpec, rng: np.random.Generator, family: int, n_words: int,
            s: int) -> list[_Placed]:
    """Place n_words into the family's band structure at font scale s.

    Placement walks lines top to bottom; a word that does not fit on the
    current line moves to the next slot, and the generator gives up after a
    bounded number of failed attempts or when the page runs out.
    """
    h, w, m = spec.height, spec.width, spec.margin
    gh = GLYPH_HEIGHT * s
    placed: list[_Placed] = []
    attempts = 0
    line = 0
    group = 0

    def fail() -> None:
        nonlocal attempts
        attempts += 1
        if attempts > _MAX_PLACEMENT_ATTEMPTS:
            raise LayoutError(
                f"could not place {n_words} words on a {w}x{h} page "
                f"after {attempts} attempts (family={FAMILY_NAMES[family]}, scale={s})"
            )

    def put(text: str, x: int, y: int, grp: int, label: int) -> None:
        jx = int(rng.integers(0, s + 1))
        jy = int(rng.integers(0, s + 1))
        gray = int(rng.integers(0, 96))
        placed.append(_Placed(text, x + jx, y + jy, s, gray,
                              grp, label % spec.num_entity_labels))

    def fitting_text(family_: int, line_: int, pos_: int, max_width: int) -> str | None:
        # Re-pick a few times when the chosen word is too wide for the slot;
        # in bank mode the retry salt keeps the choice doc-independent.
        for retry in range(5):
            text = _pick_text(spec, rng, family_, line_, pos_, retry)
            tw, _ = text_nominal_size(text, s)
            if tw + s <= max_width:
                return text
            fail()
        return None

    if spec.word_bank is not None:
        max_len = max(len(t) for t in spec.word_bank)
    else:
        max_len = spec.word_len[1]

    y = m
    while len(placed) < n_words:
        if y + gh + s > h - m:
            raise LayoutError(
                f"page {w}x{h} exhausted after {len(placed)}/{n_words} words "
                f"(family={FAMILY_NAMES[family]}, scale={s})"
            )
        if family == 0:  # flow: full-width lines, first line is the title
            x = m
            pos = 0
            label = 0 if line == 0 else 3
            while len(placed) < n_words:
                text = fitting_text(family, line, pos, w - m - x)
                if text is None:
                    break
                put(text, x, y, group, label)
                x += text_nominal_size(text, s)[0] + 2 * s
                pos += 1
            if pos == 0:
                fail()
            group += 1
            y += 9 * s
        elif family == 1:  # keyvalue: key at the left edge, values mid-page
            vx = w // 2
            key = fitting_text(family, line, 0, vx - m - 2 * s)
            if key is not None:
                put(key, m, y, group, 1)
                x = vx
                n_vals = 1 + (line % 3)
                for pos in range(n_vals):
                    if len(placed) >= n_words:
                        break
                    text = fitting_text(family, line, pos + 1, w - m - x)
                    if text is None:
                        break
                    put(text, x, y, group + 1, 2)
                    x += text_nominal_size(text, s)[0] + 2 * s
                group += 2
            y += 11 * s
        elif family == 2:  # grid: fixed columns, header row first
            cell = s * (GLYPH_ADVANCE * max_len + 3)
            ncols = max(2, (w - 2 * m) // cell)
            pitch = (w - 2 * m) // ncols
            label = 1 if line == 0 else 2
            any_put = False
            for col in range(ncols):
                if len(placed) >= n_words:
                    break
                x = m + col * pitch
                text = fitting_text(family, line, col, min(pitch - s, w - m - x))
                if text is None:
                    continue
                put(text, x, y, group, label)
                any_put = True
            if not any_put:
                fail()
            group += 1
            y += 10 * s
        else:  # list: short indented items with wide line pitch
            x = m + 6 * s
            for pos in range(2 + (line % 2)):
                if len(placed) >= n_words:
                    break
                text = fitting_text(family, line, pos, w - m - x)
                if text is None:
                    break
                put(text, x, y, group, 3)
                x += text_nominal_size(text, s)[0] + 2 * s
            group += 1
            y += 11 * s
        line += 1
    return placed


def _render_word(px: np.ndarray, placed: _Placed) -> Box:
    """Paint one word and return the tight (half-open) box of its ink."""
    s = placed.scale
    x0 = y0 = math.inf
    x1 = y1 = -math.inf
    for k, ch in enumerate(placed.text):
        rows = GLYPHS.get(ch)
        if rows is None:
            raise ConfigurationError(f"character {ch!r} not in the built-in font")
        gx = placed.x + k * GLYPH_ADVANCE * s
        for r, bits in enumerate(rows):
            for c in range(5):
                if bits >> (4 - c) & 1:
                    ax, ay = gx + c * s, placed.y + r * s
                    px[ay:ay + s, ax:ax + s] = placed.gray
                    x0, y0 = min(x0, ax), min(y0, ay)
                    x1, y1 = max(x1, ax + s), max(y1, ay + s)
    if not math.isfinite(x0):
        raise ConfigurationError(f"word {placed.text!r} rendered no ink")
    return int(x0), int(y0), int(x1), int(y1)


def generate_document(seed: int, index: int, spec: CorpusSpec) -> DocumentSample:
    """Deterministically generate one annotated page.

    Same (seed, index, spec) always yields byte-identical pixels and
    annotations. The class label cycles through layout families so every
    corpus is class-balanced.
    """
    spec.validate()
    rng = np.random.default_rng([seed, index])
    class_label = index % spec.num_classes
    n_words = int(rng.integers(spec.word_count[0], spec.word_count[1] + 1))
    scale = int(rng.integers(spec.scale[0], spec.scale[1] + 1))
    family = class_label % len(FAMILY_NAMES)
    # A large font may not fit the sampled word count; retry at smaller
    # scales before giving up so the word-count contract always holds.
    placed = None
    for s in range(scale, spec.scale[0] - 1, -1):
        try:
            placed = _layout(spec, rng, family, n_words, s)
            break
        except LayoutError:
            if s == spec.scale[0]:
                raise
    assert placed is not None

    px = np.full((spec.height, spec.width, 3), 255, dtype=np.uint8)
    words: list[WordAnnotation] = []
    groups: dict[int, tuple[int, list[int]]] = {}
    for i, p in enumerate(placed):
        box = _render_word(px, p)
        words.append(WordAnnotation(box=box, text=p.text, conf=1.0))
        groups.setdefault(p.group, (p.group_label, []))[1].append(i)

    entities: list[EntityAnnotation] = []
    for label, idxs in groups.values():
        boxes = [words[i].box for i in idxs]
        entities.append(EntityAnnotation(
            box=(min(b[0] for b in boxes), min(b[1] for b in boxes),
                 max(b[2] for b in boxes), max(b[3] for b in boxes)),
            label=label,
            word_indices=tuple(idxs),
        ))
    return DocumentSample(image=px, words=words, entities=entities, class_label=class_label)


def generate_corpus(seed: int, count: int, spec: CorpusSpec) -> list[DocumentSample]:
    return [generate_document(seed, i, spec) for i in range(count)]


# ---------------------------------------------------------------------------
# Persistence: manifest.json + annotations.jsonl + images/doc_%06d.ppm
# ---------------------------------------------------------------------------


def write_ppm(path: Path, image: np.ndarray) -> None:
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise FormatError(f"PPM writer needs (H, W, 3) uint8, got {image.shape} {image.dtype}")
    h, w = image.shape[:2]
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(image.tobytes())


def read_ppm(path: Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data.startswith(b"P6"):
        raise FormatError(f"{path}: not a P6 PPM (bad magic)")
    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # then exactly one whitespace byte before the pixel payload.
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tok = data[start:pos]
        if not tok.isdigit():
            raise FormatError(f"{path}: malformed PPM header near byte {start}")
        fields.append(int(tok))
    pos += 1  # the single whitespace after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise FormatError(f"{path}: unsupported PPM maxval {maxval}")
    payload = data[pos:pos + h * w * 3]
    if len(payload) != h * w * 3:
        raise FormatError(f"{path}: truncated PPM payload ({len(payload)} of {h * w * 3} bytes)")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3).copy()


def _word_to_json(wa: WordAnnotation) -> dict:
    return {"box": list(wa.box), "text": wa.text, "conf": wa.conf}


def _entity_to_json(ea: EntityAnnotation) -> dict:
    return {"box": list(ea.box), "label": ea.label, "word_indices": list(ea.word_indices)}


def persist_corpus(samples: list[DocumentSample], root: Path, *,
                   charset: str = DEFAULT_CHARSET, seed: int = 0,
                   class_names: list[str] | None = None,
                   entity_label_names: list[str] | None = None) -> CorpusManifest:
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    lines = []
    for i, s in enumerate(samples):
        rel = f"images/doc_{i:06d}.ppm"
        write_ppm(root / rel, s.image)
        lines.append(json.dumps({
            "image": rel,
            "class": s.class_label,
            "words": [_word_to_json(w) for w in s.words],
            "entities": [_entity_to_json(e) for e in s.entities],
        }))
    (root / "annotations.jsonl").write_text("".join(l + "\n" for l in lines), encoding="utf-8")
    manifest = CorpusManifest(
        root=root,
        count=len(samples),
        charset=charset,
        class_names=class_names or list(FAMILY_NAMES),
        entity_label_names=entity_label_names or list(ENTITY_LABEL_NAMES),
        seed=seed,
    )
    (root / "manifest.json").write_text(json.dumps({
        "count": manifest.count,
        "charset": manifest.charset,
        "class_names": manifest.class_names,
        "entity_label_names": manifest.entity_label_names,
        "seed": manifest.seed,
    }, indent=2), encoding="utf-8")
    return manifest


def load_manifest(root: Path) -> CorpusManifest:
    root = Path(root)
    path = root / "manifest.json"
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: {e}") from e
    return CorpusManifest(
        root=root,
        count=int(raw["count"]),
        charset=str(raw["charset"]),
        class_names=list(raw["class_names"]),
        entity_label_names=list(raw["entity_label_names"]),
        seed=int(raw["seed"]),
    )


def load_corpus(root: Path) -> list[DocumentSample]:
    root = Path(root)
    manifest = load_manifest(root)
    ann_path = root / "annotations.jsonl"
    samples: list[DocumentSample] = []
    text = ann_path.read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as e:
            raise FormatError(f"{ann_path}: line {lineno}: {e}") from e
        image = read_ppm(root / raw["image"])
        words = [WordAnnotation(box=tuple(w["box"]), text=w["text"], conf=float(w["conf"]))
                 for w in raw["words"]]
        entities = [EntityAnnotation(box=tuple(e["box"]), label=int(e["label"]),
                                     word_indices=tuple(e["word_indices"]))
                    for e in raw["entities"]]
        samples.append(DocumentSample(image=image, words=words, entities=entities,
                                      class_label=int(raw["class"])))
    if len(samples) != manifest.count:
        raise IntegrityError(
            f"{root}: manifest says {manifest.count} samples, annotations hold {len(samples)}"
        )
    return samples


def spec_from_dict(raw: dict) -> CorpusSpec:
    """Build a CorpusSpec from the run-config "corpus" section."""
    kwargs: dict = {}
    for key in ("height", "width", "num_classes", "num_entity_labels", "margin"):
        if key in raw:
            kwargs[key] = int(raw[key])
    for key in ("word_count", "scale", "word_len"):
        if key in raw:
            lo, hi = raw[key]
            kwargs[key] = (int(lo), int(hi))
    if "charset" in raw:
        kwargs["charset"] = str(raw["charset"])
    if raw.get("word_bank") is not None:
        kwargs["word_bank"] = tuple(str(w) for w in raw["word_bank"])
    spec = CorpusSpec(**kwargs)
    spec.validate()
    return spec


def default_word_bank(size: int, charset: str, seed: int = 7) -> tuple[str, ...]:
    """A deterministic bank of distinct short words over `charset`."""
    rng = np.random.default_rng(seed)
    bank: list[str] = []
    seen = set()
    while len(bank) < size:
        n = int(rng.integers(3, 6))
        w = "".join(charset[int(c)] for c in rng.integers(0, len(charset), size=n))
        if w not in seen:
            seen.add(w)
            bank.append(w)
    return tuple(bank)


__all__ = [
    "Box", "WordAnnotation", "EntityAnnotation", "DocumentSample", "CorpusSpec",
    "CorpusManifest", "LayoutError", "generate_document", "generate_corpus",
    "persist_corpus", "load_corpus", "load_manifest", "write_ppm", "read_ppm",
    "spec_from_dict", "default_word_bank", "DEFAULT_CHARSET", "FAMILY_NAMES",
    "ENTITY_LABEL_NAMES",
]
