import random

import pytest
from hypothesis import given, settings, strategies as st

from cee import (
    CENSUS_HEADER,
    ConceptMultiset,
    DetectionRecord,
    EmptyCorpus,
    FLATTENED_CONFIG,
    MalformedObject,
    PATH_CONFIG,
    SceneSample,
    build_samples,
    census_csv,
    corpus_report,
    operation_census,
    random_scene_corpus,
    read_detections,
    read_targets,
    scene_csed,
    split_caption,
    threshold_filter,
)


def det(image_id, concept, confidence):
    return DetectionRecord(image_id=image_id, concept=concept, confidence=confidence)


# -- records ------------------------------------------------------------------


def test_detection_confidence_range_enforced():
    with pytest.raises(ValueError):
        det("i", "car", 1.2)
    with pytest.raises(ValueError):
        det("i", "car", -0.1)


def test_sample_requires_nonempty_target():
    with pytest.raises(ValueError):
        SceneSample(image_id="i", generated=ConceptMultiset(), target=ConceptMultiset())


# -- threshold filtering ---------------------------------------------------------


def test_filter_drops_low_confidence():
    kept = threshold_filter([det("i", "car", 0.65), det("i", "dog", 0.55)], 0.6)
    assert kept == {"i": ConceptMultiset(["car"])}


def test_filter_boundary_inclusive():
    kept = threshold_filter([det("i", "car", 0.60)], 0.6)
    assert kept["i"] == ConceptMultiset(["car"])


def test_filter_zero_keeps_everything():
    records = [det("i", "car", 0.0), det("i", "car", 0.9), det("j", "dog", 0.4)]
    kept = threshold_filter(records, 0.0)
    assert kept["i"] == ConceptMultiset(["car", "car"])
    assert kept["j"] == ConceptMultiset(["dog"])


def test_filter_keeps_image_key_when_all_cut():
    kept = threshold_filter([det("i", "car", 0.2)], 0.9)
    assert kept == {"i": ConceptMultiset()}


def test_filter_rejects_bad_threshold():
    with pytest.raises(ValueError):
        threshold_filter([], 1.5)


# -- per-sample script ------------------------------------------------------------


def test_street_scene_local_script(street):
    sample = SceneSample(
        image_id="fig",
        generated=ConceptMultiset(["car", "car", "traffic light", "car", "stop sign"]),
        target=ConceptMultiset(["light", "buildings"]),
    )
    script = scene_csed(sample, street)  # path profile by default
    kinds = [op.kind for op in script]
    assert kinds.count("D") == 3 and kinds.count("R") == 2 and kinds.count("I") == 0
    assert {op.source for op in script if op.kind == "D"} == {"car"}
    assert {(op.source, op.target) for op in script if op.kind == "R"} == {
        ("traffic light", "light"),
        ("stop sign", "buildings"),
    }


def test_identical_sets_empty_script(street):
    s = ConceptMultiset(["car", "light"])
    sample = SceneSample(image_id="i", generated=s, target=s)
    assert len(scene_csed(sample, street)) == 0


def test_empty_generated_set_all_inserts(street):
    sample = SceneSample(
        image_id="i",
        generated=ConceptMultiset(),
        target=ConceptMultiset(["light", "buildings"]),
    )
    script = scene_csed(sample, street)
    assert [op.kind for op in script] == ["I", "I"]


# -- corpus report ------------------------------------------------------------------


def _toy_corpus():
    detections = {
        "a": [det("a", "car", 0.55), det("a", "light", 0.9)],
        "b": [det("b", "truck", 0.65), det("b", "person", 0.45)],
        "c": [det("c", "buildings", 0.75)],
    }
    targets = {
        "a": ConceptMultiset(["car", "light"]),
        "b": ConceptMultiset(["truck", "person"]),
        "c": ConceptMultiset(["buildings"]),
    }
    return detections, targets


def test_insert_count_monotone_on_toy_corpus(street):
    detections, targets = _toy_corpus()
    report = corpus_report(detections, targets, [0.5, 0.7], street, FLATTENED_CONFIG)
    (t_low, low), (t_high, high) = report
    assert (t_low, t_high) == (0.5, 0.7)
    assert high.n_insert >= low.n_insert


def test_perfect_corpus_all_zero(street):
    detections = {"a": [det("a", "car", 0.9)]}
    targets = {"a": ConceptMultiset(["car"])}
    ((_, census),) = corpus_report(detections, targets, [0.5], street, FLATTENED_CONFIG)
    assert census.n_insert == census.n_delete == census.n_replace == 0
    assert census.mean_total == 0.0


def test_street_scene_census_row(street):
    detections = {
        "fig": [
            det("fig", "car", 0.9), det("fig", "car", 0.8), det("fig", "car", 0.7),
            det("fig", "traffic light", 0.95), det("fig", "stop sign", 0.85),
        ]
    }
    targets = {"fig": ConceptMultiset(["light", "buildings"])}
    ((_, census),) = corpus_report(detections, targets, [0.6], street, PATH_CONFIG)
    assert census.n_delete == 3 and census.n_replace == 2 and census.n_insert == 0
    assert census.mean_total == 14.0


def test_corpus_report_empty_rejected(street):
    with pytest.raises(EmptyCorpus):
        corpus_report({}, {}, [0.5], street, FLATTENED_CONFIG)


def test_census_additivity(street):
    rng = random.Random(5)
    detections, targets = random_scene_corpus(rng, street, n_images=8)
    samples, _, _ = build_samples(detections, targets, 0.5)
    scripts = [scene_csed(s, street, FLATTENED_CONFIG) for s in samples]
    whole = operation_census(scripts)
    parts = [operation_census([s]) for s in scripts]
    assert whole.n_insert == sum(p.n_insert for p in parts)
    assert whole.n_delete == sum(p.n_delete for p in parts)
    assert whole.n_replace == sum(p.n_replace for p in parts)
    assert whole.cost_insert == sum(p.cost_insert for p in parts)


def test_build_samples_reports_join_misses(street):
    detections = {"a": [det("a", "car", 0.9)], "only-det": []}
    targets = {"a": ConceptMultiset(["car"]), "only-tgt": ConceptMultiset(["light"])}
    samples, det_only, tgt_only = build_samples(detections, targets, 0.5)
    assert [s.image_id for s in samples] == ["a"]
    assert det_only == ["only-det"]
    assert tgt_only == ["only-tgt"]


# -- serialization ----------------------------------------------------------------


def test_census_csv_shape_and_determinism(street):
    detections, targets = _toy_corpus()
    report = corpus_report(detections, targets, [0.5, 0.7], street, FLATTENED_CONFIG)
    text = census_csv(report)
    assert text.splitlines()[0] == CENSUS_HEADER
    assert text == census_csv(
        corpus_report(detections, targets, [0.5, 0.7], street, FLATTENED_CONFIG)
    )


def test_read_detections_and_targets(tmp_path):
    det_path = tmp_path / "det.jsonl"
    det_path.write_text(
        '{"image_id": "x", "detections": [{"concept": "car", "confidence": 0.9}]}\n'
        '{"image_id": "y", "detections": []}\n',
        encoding="utf-8",
    )
    tgt_path = tmp_path / "tgt.jsonl"
    tgt_path.write_text('{"image_id": "x", "concepts": ["car", "light"]}\n', encoding="utf-8")
    detections = read_detections(det_path)
    assert set(detections) == {"x", "y"}
    assert detections["x"][0].concept == "car"
    targets = read_targets(tgt_path)
    assert targets["x"] == ConceptMultiset(["car", "light"])


def test_read_detections_rejects_missing_keys(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"detections": []}\n', encoding="utf-8")
    with pytest.raises(MalformedObject):
        read_detections(p)


def test_split_caption_commas_keep_multiword():
    assert split_caption("Traffic Light, stop sign,car") == [
        "traffic light", "stop sign", "car",
    ]
    assert split_caption("car light person") == ["car", "light", "person"]


# -- monotonicity property -----------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_threshold_monotonicity(seed, street):
    rng = random.Random(seed)
    detections, targets = random_scene_corpus(rng, street, n_images=6)
    thresholds = [0.5, 0.6, 0.7]
    sizes = []
    for t_d in thresholds:
        kept = threshold_filter(
            [r for records in detections.values() for r in records], t_d
        )
        sizes.append({i: len(ms) for i, ms in kept.items()})
    for lo, hi in zip(sizes, sizes[1:]):
        assert all(hi[i] <= lo[i] for i in lo)
    report = corpus_report(detections, targets, thresholds, street, PATH_CONFIG)
    inserts = [census.n_insert for _, census in report]
    assert inserts == sorted(inserts)
