import pytest

from mtslot.corpus import parse_markup, parse_sentence
from mtslot.synth import (FULL_SIZES, AppSpec, ConfigError, ValuePool, default_suite,
                          generate_synthetic)


def test_four_apps_with_table_slot_counts():
    suite = default_suite()
    assert {a: len(s.slots) for a, s in suite.items()} == \
        {"United": 12, "OpenTable": 6, "Greyhound": 13, "Airbnb": 11}


def test_deterministic():
    app = default_suite()["OpenTable"]
    assert generate_synthetic(app, 3, 7) == generate_synthetic(app, 3, 7)


@pytest.mark.parametrize("name", list(FULL_SIZES))
def test_span_limits_and_parse(name):
    app = default_suite()[name]
    limit = 4 if name == "United" else 1
    for line in generate_synthetic(app, 300, 1):
        spans = parse_markup(line).spans
        assert 1 <= len(spans) <= limit
        assert {s.slot for s in spans} <= set(app.slots)


def test_full_sizes_accepted():
    app = default_suite()["OpenTable"]
    assert len(generate_synthetic(app, FULL_SIZES["OpenTable"], 0)) == 3151


def test_heldout_values_appear_only_when_asked():
    app = default_suite()["Airbnb"]
    heldout = {v.lower() for p in app.values.values() for v in p.heldout}
    words = lambda frac: {t.norm for l in generate_synthetic(app, 400, 2, frac)
                          for t in parse_sentence(l).tokens}
    assert not words(0.0) & heldout
    assert words(0.5) & heldout


def test_spec_validation():
    with pytest.raises(ConfigError):
        AppSpec("x", ["A"], {"A": ValuePool(["v"], ["v"])}, ["go {A}"])
    with pytest.raises(ConfigError):
        AppSpec("x", ["A"], {"A": ValuePool(["v"])}, ["go {B}"])
    with pytest.raises(ConfigError):
        AppSpec("x", ["A"], {"A": ValuePool(["v"])}, ["{A} {A}"], max_slots=1)
    with pytest.raises(ConfigError):
        generate_synthetic(default_suite()["United"], 0, 0)
