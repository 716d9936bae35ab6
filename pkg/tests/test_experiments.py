import json

import pytest

from mtslot import experiments as ex
from mtslot.corpus import oov_stats
from mtslot.evaluation import conll_f1, per_slot_f1
from mtslot.model import ConfigError, predict
from mtslot.vocab import vocab_from_sentences

TINY = {"United": 40, "OpenTable": 30, "Greyhound": 30, "Airbnb": 30}


@pytest.fixture
def cfg(tmp_path):
    c = ex.ExperimentConfig(sizes=dict(TINY), ablation_sizes=[3, 6, ex.FULL],
                            oov_grid=[2, 4, 8, ex.FULL], epochs=1, min_support=3,
                            output_dir=str(tmp_path))
    ex.cmd_generate(c)
    return c


def test_config_invariants():
    with pytest.raises(ConfigError):
        ex.ExperimentConfig(targets=["United"])
    with pytest.raises(ConfigError):
        ex.ExperimentConfig(ablation_sizes=[400, 200])
    with pytest.raises(ConfigError):
        ex.ExperimentConfig(ablation_sizes=[0, ex.FULL])
    with pytest.raises(ConfigError):
        ex.ExperimentConfig.from_dict({"bogus": 1})


def test_config_json_round_trip(tmp_path):
    c = ex.ExperimentConfig(epochs=3)
    (tmp_path / "c.json").write_text(c.to_json())
    assert ex.ExperimentConfig.load(tmp_path / "c.json") == c


def test_generate_four_files_deterministic(cfg):
    first = {p.name: p.read_bytes() for p in cfg.data_dir.iterdir()}
    assert sorted(first) == ["Airbnb.txt", "Greyhound.txt", "OpenTable.txt", "United.txt"]
    ex.cmd_generate(cfg)
    assert first == {p.name: p.read_bytes() for p in cfg.data_dir.iterdir()}
    assert len(first["OpenTable.txt"].decode().splitlines()) == 1 + TINY["OpenTable"]


def test_missing_corpus(tmp_path):
    with pytest.raises(ConfigError, match="missing corpus"):
        ex.load_splits(ex.ExperimentConfig(output_dir=str(tmp_path / "none")))


def test_subsets_nest(cfg):
    train = ex.load_splits(cfg)["Airbnb"].train
    a, b, c = (ex.subset(train, n) for n in (3, 6, ex.FULL))
    assert a == b[:3] and b == c[:6]


def test_multi_cell_uses_full_anchor(cfg):
    splits = ex.load_splits(cfg)
    cell = ex.train_cell(cfg, splits, "Airbnb", 3, "multi")
    steps = [t for _, t, _, _ in cell.log.steps]
    n_anchor = len(splits["United"].train)
    assert steps.count("United") == -(-n_anchor // 25)
    assert steps[:4] == ["United", "OpenTable", "Greyhound", "Airbnb"]
    assert sorted(cell.task_vocabs["United"].tokens) == \
        sorted(vocab_from_sentences(splits["United"].train).tokens)


def test_ablation_rows_and_replay(cfg):
    splits = ex.load_splits(cfg)
    rows = ex.run_ablation(cfg, splits)
    assert len(rows) == 3 * 3 * 2
    assert {r.mode for r in rows} == {"single", "multi"}
    r = rows[5]
    cell = ex.train_cell(cfg, splits, r.target, cfg.ablation_sizes[2], r.mode)
    test = splits[r.target].test
    assert conll_f1([s.tags for s in test], predict(cell.model, r.target, test)).f1 == r.f1


def test_open_vs_closed_layout(cfg):
    rows = ex.run_open_vs_closed(cfg)
    keys = {(r.target, r.vocab, r.scope) for r in rows}
    assert len(rows) == 16 and len(keys) == 16


def test_oov_curve_monotone_and_recounted(cfg):
    splits = ex.load_splits(cfg)
    out = ex.run_oov_curve(cfg, splits)
    for app in cfg.apps:
        rates = [r for a, _, r in out if a == app]
        assert all(x >= y for x, y in zip(rates, rates[1:]))
        assert rates[0] == max(rates)
    app, n, rate = out[1]
    want, _ = oov_stats(vocab_from_sentences(splits[app].train[:n]), splits[app].test)
    assert rate == want


def test_per_slot_support(cfg):
    splits = ex.load_splits(cfg)
    trained = ex.train_open_closed(cfg, splits)
    rows = ex.run_per_slot(cfg, splits, trained)
    assert rows and all(r[4] >= cfg.min_support for r in rows)
    app, slot, _, _, support = rows[0]
    gold = [s.tags for s in splits[app].test]
    assert per_slot_f1(gold, gold)[slot].support == support


def test_csv_rerun_identical(cfg, tmp_path):
    a = ex.rows_csv(ex.RESULT_HEADER, ex.run_ablation(cfg))
    b = ex.rows_csv(ex.RESULT_HEADER, ex.run_ablation(cfg))
    assert a == b and a.splitlines()[0] == ",".join(ex.RESULT_HEADER)


def test_output_dir_resolution(monkeypatch):
    c = ex.ExperimentConfig(output_dir="from-file")
    monkeypatch.delenv(ex.OUTPUT_ENV, raising=False)
    assert ex.resolve_output_dir(c).output_dir == "from-file"
    monkeypatch.setenv(ex.OUTPUT_ENV, "from-env")
    assert ex.resolve_output_dir(c).output_dir == "from-env"
    assert ex.resolve_output_dir(c, "from-flag").output_dir == "from-flag"


def test_result_row_range():
    with pytest.raises(ValueError):
        ex.ResultRow("x", "a", 1, "single", "closed", "full", 101.0, 0)
