import json

import numpy as np
import pytest

from regiondoc.corpus import (
    CorpusSpec,
    LayoutError,
    default_word_bank,
    generate_corpus,
    generate_document,
    load_corpus,
    persist_corpus,
    read_ppm,
    write_ppm,
)
from regiondoc.errors import ConfigurationError, FormatError, IntegrityError

SPEC = CorpusSpec(height=128, width=128, word_count=(6, 12), scale=(1, 2))


def boxes_intersect(a, b):
    return not (a[2] <= b[0] or b[2] <= a[0] or a[3] <= b[1] or b[3] <= a[1])


def test_generation_is_pure():
    a = generate_document(11, 3, SPEC)
    b = generate_document(11, 3, SPEC)
    assert np.array_equal(a.image, b.image)
    assert a.words == b.words
    assert a.entities == b.entities
    assert a.class_label == b.class_label


def test_different_index_differs():
    a = generate_document(11, 0, SPEC)
    b = generate_document(11, 1, SPEC)
    assert not np.array_equal(a.image, b.image)


def test_ab_box_arithmetic():
    # Tight box of a word whose glyphs span the full 5x7 cell: width
    # s*(6L-1), height 7s. "A" and "B" both ink the cell's edge rows/cols.
    spec = CorpusSpec(height=128, width=128, word_count=(1, 1), scale=(2, 2),
                      num_classes=1, word_bank=("AB",))
    doc = generate_document(0, 0, spec)
    assert len(doc.words) == 1
    x0, y0, x1, y1 = doc.words[0].box
    assert x1 - x0 == 2 * (6 * 2 - 1) == 22
    assert y1 - y0 == 7 * 2 == 14


def test_word_count_range_enforced():
    spec = CorpusSpec(height=256, width=256, word_count=(20, 40), scale=(1, 1))
    for i in range(50):
        doc = generate_document(5, i, spec)
        assert 20 <= len(doc.words) <= 40


def test_boxes_are_tight():
    for i in range(8):
        doc = generate_document(3, i, SPEC)
        ink = np.any(doc.image != 255, axis=2)
        for w in doc.words:
            x0, y0, x1, y1 = w.box
            region = ink[y0:y1, x0:x1]
            assert region[0, :].any() and region[-1, :].any()
            assert region[:, 0].any() and region[:, -1].any()
    # no ink outside the union of word boxes
    outside = ink.copy()
    for w in doc.words:
        x0, y0, x1, y1 = w.box
        outside[y0:y1, x0:x1] = False
    assert not outside.any()


def test_word_boxes_disjoint():
    for i in range(12):
        doc = generate_document(9, i, SPEC)
        boxes = [w.box for w in doc.words]
        for j in range(len(boxes)):
            for k in range(j + 1, len(boxes)):
                assert not boxes_intersect(boxes[j], boxes[k]), (boxes[j], boxes[k])


def test_entities_contain_word_centers():
    for i in range(8):
        doc = generate_document(21, i, SPEC)
        assert doc.entities
        for e in doc.entities:
            assert e.label < SPEC.num_entity_labels
            for wi in e.word_indices:
                x0, y0, x1, y1 = doc.words[wi].box
                cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
                assert e.box[0] <= cx < e.box[2]
                assert e.box[1] <= cy < e.box[3]


def test_class_labels_cycle_families():
    docs = [generate_document(2, i, SPEC) for i in range(8)]
    assert [d.class_label for d in docs] == [0, 1, 2, 3, 0, 1, 2, 3]


def test_word_bank_mode_is_slot_deterministic():
    bank = default_word_bank(16, "ABCDEFGH")
    spec = CorpusSpec(height=128, width=128, word_count=(8, 8), scale=(2, 2),
                      num_classes=1, word_bank=bank)
    a = generate_document(1, 0, spec)
    b = generate_document(1, 5, spec)
    assert [w.text for w in a.words] == [w.text for w in b.words]


def test_page_size_must_be_multiple_of_32():
    with pytest.raises(ConfigurationError):
        CorpusSpec(height=100, width=128).validate()
    with pytest.raises(ConfigurationError):
        CorpusSpec(height=128, width=48).validate()


def test_unplaceable_words_error_out():
    spec = CorpusSpec(height=64, width=64, word_count=(8, 8), scale=(8, 8),
                      word_len=(8, 8), num_classes=1)
    with pytest.raises(LayoutError):
        generate_document(0, 0, spec)


def test_persist_load_round_trip(tmp_path):
    samples = generate_corpus(seed=4, count=6, spec=SPEC)
    persist_corpus(samples, tmp_path, seed=4)
    loaded = load_corpus(tmp_path)
    assert len(loaded) == len(samples)
    for a, b in zip(samples, loaded):
        assert np.array_equal(a.image, b.image)
        assert a.words == b.words
        assert a.entities == b.entities
        assert a.class_label == b.class_label


def test_empty_corpus_round_trip(tmp_path):
    manifest = persist_corpus([], tmp_path)
    assert manifest.count == 0
    assert (tmp_path / "annotations.jsonl").read_text() == ""
    assert load_corpus(tmp_path) == []


def test_ppm_magic_and_round_trip(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, size=(32, 48, 3), dtype=np.uint8)
    path = tmp_path / "x.ppm"
    write_ppm(path, img)
    assert path.read_bytes().startswith(b"P6\n")
    assert np.array_equal(read_ppm(path), img)


def test_malformed_ppm_rejected(tmp_path):
    path = tmp_path / "bad.ppm"
    path.write_bytes(b"P5\n2 2\n255\n" + bytes(12))
    with pytest.raises(FormatError, match="bad.ppm"):
        read_ppm(path)
    path.write_bytes(b"P6\n2 two\n255\n" + bytes(12))
    with pytest.raises(FormatError):
        read_ppm(path)
    path.write_bytes(b"P6\n4 4\n255\n" + bytes(10))
    with pytest.raises(FormatError, match="truncated"):
        read_ppm(path)


def test_malformed_annotation_line_names_file_and_line(tmp_path):
    samples = generate_corpus(seed=4, count=2, spec=SPEC)
    persist_corpus(samples, tmp_path, seed=4)
    ann = tmp_path / "annotations.jsonl"
    lines = ann.read_text().splitlines()
    lines[1] = "{not json"
    ann.write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError, match="line 2"):
        load_corpus(tmp_path)


def test_manifest_count_mismatch(tmp_path):
    samples = generate_corpus(seed=4, count=3, spec=SPEC)
    persist_corpus(samples, tmp_path, seed=4)
    raw = json.loads((tmp_path / "manifest.json").read_text())
    raw["count"] = 5
    (tmp_path / "manifest.json").write_text(json.dumps(raw))
    with pytest.raises(IntegrityError):
        load_corpus(tmp_path)
