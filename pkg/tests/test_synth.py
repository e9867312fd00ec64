import numpy as np

from stancelab import labeling as lb
from stancelab import synth
from stancelab.config import default_rule_path
from stancelab.textproc import tokenize


def test_deterministic_per_seed():
    spec = synth.SynthSpec(n_users=40, rng_seed=9)
    c1, t1 = synth.generate(spec)
    c2, t2 = synth.generate(spec)
    assert c1.posts == c2.posts
    assert t1.p0 == t2.p0
    c3, _t3 = synth.generate(synth.SynthSpec(n_users=40, rng_seed=10))
    assert c3.posts != c1.posts


def test_ground_truth_consistency():
    spec = synth.SynthSpec(n_users=80, rng_seed=1,
                           turnaround_effects={"gender": {"male": -0.1}})
    c, truth = synth.generate(spec)
    assert set(truth.stance) == set(c.users)
    for uid in c.users:
        assert truth.stance[uid] in ("defense", "opposition")
        lo, hi = synth.COHORT_AGES[truth.cohort[uid]]
        assert lo <= truth.age[uid] <= hi
        assert 0 < truth.p0[uid] < 1 and 0 < truth.p1[uid] < 1
        assert truth.delta[uid] == truth.p1[uid] - truth.p0[uid]


def test_posts_fall_in_periods():
    spec = synth.SynthSpec(n_users=30, rng_seed=2)
    c, _truth = synth.generate(spec)
    (a0, a1), (b0, b1) = spec.periods
    for p in c.posts:
        assert (a0 <= p.timestamp < a1) or (b0 <= p.timestamp < b1)


def test_signal_emojis_track_stance():
    spec = synth.SynthSpec(n_users=60, rng_seed=3)
    c, truth = synth.generate(spec)
    by_user = c.posts_by_user()
    for uid, posts in by_user.items():
        text = " ".join(p.text for p in posts)
        own = (synth.DEFENSE_EMOJI if truth.stance[uid] == "defense"
               else synth.OPPOSITION_EMOJI)
        other = (synth.OPPOSITION_EMOJI if truth.stance[uid] == "defense"
                 else synth.DEFENSE_EMOJI)
        assert text.count(own) >= text.count(other)


def test_self_reports_parseable_by_shipped_rules():
    spec = synth.SynthSpec(n_users=120, rng_seed=4)
    c, truth = synth.generate(spec)
    rules = lb.load_ruleset(default_rule_path("gazetteer.tsv"),
                            default_rule_path("names.tsv"),
                            default_rule_path("patterns.tsv"),
                            default_rule_path("stance_seeds.tsv"))
    for uid, prof in c.users.items():
        rep = truth.self_reported[uid]
        if "gender" in rep:
            assert lb.label_gender(prof, rules) == truth.gender[uid]
        if "location" in rep:
            assert lb.label_location(prof, rules.gazetteer) == truth.country[uid]
        if "age_cohort" in rep:
            assert lb.label_age(prof, rules) == truth.cohort[uid]
        if "stance" in rep:
            got = lb.label_stance(prof.bio or "", [], rules.stance_seeds)
            assert got == truth.stance[uid]


def test_planted_effect_shifts_delta():
    spec = synth.SynthSpec(n_users=800, rng_seed=5, p0_mode="mid",
                           turnaround_effects={"gender": {"male": -0.2}})
    _c, truth = synth.generate(spec)
    male = [truth.delta[u] for u in truth.delta if truth.gender[u] == "male"]
    female = [truth.delta[u] for u in truth.delta
              if truth.gender[u] == "female"]
    assert np.mean(male) - np.mean(female) < -0.15


def test_interactions_reference_corpus_users():
    spec = synth.SynthSpec(n_users=25, rng_seed=6, interaction_density=0.9)
    c, _truth = synth.generate(spec)
    for p in c.posts:
        if p.retweet_of:
            assert p.retweet_of in c.users and p.retweet_of != p.author_id
        for target, kind in p.directed_at:
            assert target in c.users and target != p.author_id
            assert kind in ("mention", "reply", "quote")
