import json
import random

import pytest

from wordec.egraph import init_pair, saturate
from wordec.extract import extract_ilp
from wordec.fixtures import load_pair
from wordec.ir import evaluate
from wordec.proof import (ProofError, build_waterfall, check_adjacency,
                          explain, rule_hints, write_waterfall)
from wordec.rewrites import baseline_rules


def _saturated(name):
    spec, impl = load_pair(name)
    g = init_pair(spec, impl)
    rules = baseline_rules()
    saturate(g, rules)
    return spec, impl, g, rules


def _waterfall(name):
    spec, impl, g, rules = _saturated(name)
    res = extract_ilp(g, timeout=20.0)
    return build_waterfall(g, spec, impl, res, rules), spec, impl


class TestExplain:
    def test_fig4_exactly_two_steps(self):
        spec, impl, g, rules = _saturated("fig4")
        steps = explain(g, spec.body, impl.body, rule_hints(rules))
        assert len(steps) == 2
        assert [s.rule_id for s in steps] == ["mult-to-shift", "shift-cancel"]
        assert [s.position for s in steps] == [(0,), ()]

    def test_unmerged_terms_rejected(self):
        spec, impl, g, rules = _saturated("boxfilter")
        with pytest.raises(ProofError):
            explain(g, spec.body, impl.body, rule_hints(rules))

    def test_steps_are_semantically_sound(self):
        spec, impl, g, rules = _saturated("adpcm")
        steps = explain(g, spec.body, impl.body, rule_hints(rules))
        for s in steps:
            for x in range(16):
                assert evaluate(s.before, {"x": x}) == \
                    evaluate(s.after, {"x": x}), s.rule_id


class TestWaterfall:
    def test_case_study_adjacency(self):
        w, _, _ = _waterfall("fig1-scaled")
        check_adjacency(w)

    def test_chains_end_where_expected(self):
        w, spec, impl = _waterfall("fig1-scaled")
        assert w.spec_chain[0] == spec.body
        assert w.impl_chain[-1] == impl.body
        assert not w.has_center
        assert w.spec_chain[-1] == w.impl_chain[0]

    def test_every_step_oracle_sound(self):
        w, spec, _ = _waterfall("fig1-scaled")
        rng = random.Random(7)
        envs = [{n: rng.randint(a.lo, a.hi) for n, a in spec.inputs}
                for _ in range(200)]
        for chain in (w.spec_chain, w.impl_chain):
            for a, b in zip(chain, chain[1:]):
                for env in envs:
                    assert evaluate(a, env) == evaluate(b, env)

    def test_identical_designs_zero_steps(self):
        spec, _ = load_pair("adpcm")
        g = init_pair(spec, spec)
        rules = baseline_rules()
        saturate(g, rules)
        res = extract_ilp(g, timeout=20.0)
        w = build_waterfall(g, spec, spec, res, rules)
        assert w.spec_steps == [] and w.impl_steps == []
        assert not w.has_center
        obs = w.obligations()
        assert [o.kind for o in obs] == ["assume-guarantee"]

    def test_boxfilter_center_obligation(self):
        w, _, _ = _waterfall("boxfilter")
        assert w.has_center
        kinds = [o.kind for o in w.obligations()]
        assert kinds.count("center") == 1
        assert kinds[-1] == "assume-guarantee"

    def test_width_normalization_only_relabel_hops_added(self):
        spec, impl, g, rules = _saturated("fig1-scaled")
        res = extract_ilp(g, timeout=20.0)
        raw = build_waterfall(g, spec, impl, res, rules,
                              normalize_widths=False)
        norm = build_waterfall(g, spec, impl, res, rules)
        raw_n = len(raw.spec_steps) + len(raw.impl_steps)
        norm_n = len(norm.spec_steps) + len(norm.impl_steps)
        assert norm_n >= raw_n
        extra = [s for s in norm.spec_steps + norm.impl_steps
                 if s.rule_id == "width-relabel"]
        assert len(extra) == norm_n - raw_n
        for s in norm.spec_steps + norm.impl_steps:
            if s.rule_id == "width-relabel":
                assert s.checker_hint == "trivial"
        check_adjacency(norm)

    def test_obligation_indices_consistent(self):
        w, _, _ = _waterfall("vbsme4")
        designs = w.designs()
        for ob in w.obligations():
            assert 0 <= ob.left < len(designs)
            assert 0 <= ob.right < len(designs)


class TestWriteWaterfall:
    def test_layout_and_manifest(self, tmp_path):
        w, _, _ = _waterfall("fig4")
        manifest = write_waterfall(w, tmp_path)
        on_disk = json.loads((tmp_path / "manifest.json").read_text())
        assert on_disk == manifest
        for stem in manifest["designs"]:
            assert (tmp_path / "steps" / f"{stem}.sv").exists()
            assert (tmp_path / "steps" / f"{stem}.ir").exists()
        stems = set(manifest["designs"])
        for ob in on_disk["obligations"]:
            assert ob["left"] in stems and ob["right"] in stems

    def test_manifest_byte_identical_across_runs(self, tmp_path):
        texts = []
        for i in range(2):
            w, _, _ = _waterfall("fig1-scaled")
            d = tmp_path / str(i)
            write_waterfall(w, d)
            texts.append((d / "manifest.json").read_bytes())
        assert texts[0] == texts[1]
