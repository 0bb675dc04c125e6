import itertools

import pytest
from hypothesis import given, strategies as st

from cee import (
    CostConfig,
    CycleDetected,
    DanglingEdge,
    EmptySource,
    FLATTENED_CONFIG,
    MultipleRoots,
    PATH_CONFIG,
    Taxonomy,
    UnknownConcept,
    delete_cost,
    distance,
    insert_cost,
    is_replaceable,
    load_taxonomy,
    normalize_concept,
    replace_cost,
    resolve_taxonomy,
)

SIZE_TAX = """\
!root\troot
size\troot
large\tsize
small\tsize
"""


# -- normalization -----------------------------------------------------------


def test_normalize_lowercases_and_collapses_whitespace():
    assert normalize_concept("  Traffic   Light ") == "traffic light"


def test_normalize_rejects_empty():
    with pytest.raises(ValueError):
        normalize_concept("   ")


@given(st.text(min_size=1).filter(lambda s: s.strip()))
def test_normalize_idempotent(text):
    once = normalize_concept(text)
    assert normalize_concept(once) == once


# -- loading and validation ----------------------------------------------------


def test_load_size_group():
    tax = load_taxonomy(SIZE_TAX)
    assert len(tax) == 4
    assert tax.depth("large") == 2
    assert tax.root == "root"


def test_load_single_root_node():
    tax = load_taxonomy("!root\tentity\n")
    assert len(tax) == 1
    assert tax.root == "entity"


def test_load_two_cycle_rejected():
    with pytest.raises(CycleDetected):
        load_taxonomy("a\tb\nb\ta\n")


def test_load_self_loop_rejected():
    with pytest.raises(CycleDetected):
        load_taxonomy("!root\tr\na\ta\n")


def test_load_multiple_roots_rejected():
    # two parentless top nodes and no declaration
    with pytest.raises(MultipleRoots):
        load_taxonomy("a\tr1\nb\tr2\n")


def test_load_stray_parentless_node_rejected():
    with pytest.raises(DanglingEdge):
        load_taxonomy("!root\tr\na\tr\nb\tother\n")


def test_load_empty_rejected():
    with pytest.raises(EmptySource):
        load_taxonomy("# only a comment\n")


def test_comments_and_blank_lines_ignored():
    tax = load_taxonomy("# hierarchy\n\n!root\tr\n\na\tr\n")
    assert sorted(tax.nodes) == ["a", "r"]


def test_round_trip_serialization(clevr):
    text = clevr.to_text()
    again = load_taxonomy(text)
    assert again.to_text() == text
    assert again.fingerprint == clevr.fingerprint


def test_bundled_clevr_shape(clevr):
    assert len(clevr.categories) == 4
    assert len(clevr.leaves) == 17
    assert set(clevr.categories) == {"size", "color", "material", "shape"}


def test_bundled_street_shape(street):
    for concept in ("car", "truck", "light", "traffic light", "stop sign",
                    "buildings", "person"):
        assert concept in street


def test_resolve_taxonomy_env_dir(tmp_path, monkeypatch):
    (tmp_path / "mini.tax").write_text(SIZE_TAX, encoding="utf-8")
    monkeypatch.setenv("CEE_TAXONOMY_DIR", str(tmp_path))
    tax = resolve_taxonomy("mini")
    assert tax.depth("small") == 2


def test_resolve_taxonomy_unknown_name():
    with pytest.raises(FileNotFoundError):
        resolve_taxonomy("no-such-taxonomy")


# -- distances ----------------------------------------------------------------


def test_descendant_distance_zero(toy_food):
    assert distance(toy_food, "pasta", "food") == 0.0


def test_identity_distance_zero(clevr):
    assert distance(clevr, "red", "red") == 0.0


def test_rubber_metallic_distance(clevr):
    # two edges through the material category, same under both profiles
    assert distance(clevr, "rubber", "metallic", PATH_CONFIG) == 2.0
    assert distance(clevr, "rubber", "metallic", FLATTENED_CONFIG) == 2.0


def test_generalization_pays_path_cost(toy_food):
    assert distance(toy_food, "food", "pasta") == 1.0


def test_unknown_concept_rejected(clevr):
    with pytest.raises(UnknownConcept):
        distance(clevr, "zebra", "red")


def test_attach_unknown_mode():
    tax = resolve_taxonomy("clevr", attach_unknown=True)
    assert distance(tax, "zebra", "yak") == 2.0  # both hang off the root
    assert distance(tax, "zebra", "red") == 3.0
    assert delete_cost(tax, "zebra", FLATTENED_CONFIG) == 1.0
    assert delete_cost(tax, "zebra", PATH_CONFIG) == 1.0


def test_edge_rule_per_edge(clevr):
    cfg = PATH_CONFIG
    for child in clevr.nodes - {clevr.root}:
        for parent in clevr.parents(child):
            assert distance(clevr, child, parent, cfg) == 0.0
            assert distance(clevr, parent, child, cfg) == cfg.unit_edge_cost


def test_distance_symmetric_without_ancestry(clevr):
    for s, t in itertools.combinations(sorted(clevr.leaves), 2):
        if clevr.is_descendant_or_equal(s, t) or clevr.is_descendant_or_equal(t, s):
            continue
        assert distance(clevr, s, t) == distance(clevr, t, s)


def test_triangle_bound_through_root(clevr):
    cfg = PATH_CONFIG
    for s, t in itertools.combinations(sorted(clevr.leaves), 2):
        assert distance(clevr, s, t, cfg) <= (
            delete_cost(clevr, s, cfg) + insert_cost(clevr, t, cfg)
        )


def test_shortest_path_deterministic(clevr):
    path = clevr.shortest_path("rubber", "metallic")
    assert path == ["rubber", "material", "metallic"]


# -- delete / insert / replace costs -------------------------------------------


def test_flattened_leaf_costs(clevr):
    assert delete_cost(clevr, "red", FLATTENED_CONFIG) == 1.0
    assert insert_cost(clevr, "red", FLATTENED_CONFIG) == 1.0


def test_root_costs_zero(clevr):
    assert delete_cost(clevr, "entity", FLATTENED_CONFIG) == 0.0
    assert delete_cost(clevr, "entity", PATH_CONFIG) == 0.0


def test_chain_depth_costs(chain):
    assert delete_cost(chain, "leaf", PATH_CONFIG) == 2.0
    assert insert_cost(chain, "leaf", PATH_CONFIG) == 2.0
    assert delete_cost(chain, "leaf", FLATTENED_CONFIG) == 1.0


def test_weighted_delete_cost(chain):
    cfg = CostConfig(delete_weight=2.0)
    assert delete_cost(chain, "leaf", cfg) == 4.0


def test_replace_cost_delete_plus_insert(clevr):
    cfg = FLATTENED_CONFIG
    assert replace_cost(clevr, "rubber", "metallic", cfg) == (
        delete_cost(clevr, "rubber", cfg) + insert_cost(clevr, "metallic", cfg)
    )


def test_replace_cost_shortest_path(clevr):
    cfg = CostConfig(replace_mode="shortest-path")
    assert replace_cost(clevr, "rubber", "metallic", cfg) == 2.0


# -- replaceability -------------------------------------------------------------


def test_same_category_replaceable(clevr):
    assert is_replaceable(clevr, "red", "blue")


def test_cross_category_not_replaceable(clevr):
    assert not is_replaceable(clevr, "red", "cube")


def test_self_replaceable(clevr):
    assert is_replaceable(clevr, "red", "red")


def test_specialization_replaceable(toy_food):
    assert is_replaceable(toy_food, "food", "pasta")
    assert not is_replaceable(toy_food, "food", "dog")


# -- cost config validation -------------------------------------------------------


def test_cost_config_rejects_nonpositive_weight():
    with pytest.raises(ValueError):
        CostConfig(delete_weight=0.0)


def test_cost_config_rejects_unknown_mode():
    with pytest.raises(ValueError):
        CostConfig(replace_mode="teleport")


def test_taxonomy_direct_construction():
    tax = Taxonomy(root="r", parents={"a": frozenset({"r"}), "b": frozenset({"a"})})
    assert tax.depth("b") == 2
    assert tax.category_of("b") == "a"
