import pytest

from stancelab import labeling as lb
from stancelab.config import default_rule_path
from stancelab.corpus import UserProfile
from stancelab.textproc import tokenize


@pytest.fixture(scope="module")
def rules():
    return lb.load_ruleset(default_rule_path("gazetteer.tsv"),
                           default_rule_path("names.tsv"),
                           default_rule_path("patterns.tsv"),
                           default_rule_path("stance_seeds.tsv"),
                           reference_year=2017)


def prof(**kw):
    return UserProfile(user_id="u", **kw)


def test_location_from_comma_component(rules):
    assert lb.label_location(prof(location_text="Providencia, Santiago"),
                             rules.gazetteer) == "Chile"


def test_location_ambiguous_abstains(rules):
    # both countries present: abstain
    assert lb.label_location(prof(location_text="Santiago, Buenos Aires"),
                             rules.gazetteer) is None
    assert lb.label_location(prof(location_text=None), rules.gazetteer) is None
    assert lb.label_location(prof(location_text="Narnia"),
                             rules.gazetteer) is None


def test_gender_from_first_name(rules):
    assert lb.label_gender(prof(full_name="María Pérez"), rules) == "female"
    assert lb.label_gender(prof(full_name="Juan Soto"), rules) == "male"


def test_gender_from_bio_expression(rules):
    assert lb.label_gender(prof(bio="orgullosa madre de dos"),
                           rules) == "female"


def test_gender_conflict_abstains(rules):
    assert lb.label_gender(prof(bio="madre y padre a la vez"), rules) is None
    assert lb.label_gender(prof(), rules) is None


def test_cohort_boundaries():
    assert lb.cohort_of_age(17) == "<18"
    assert lb.cohort_of_age(18) == "18-29"
    assert lb.cohort_of_age(29) == "18-29"
    assert lb.cohort_of_age(30) == "30-39"
    assert lb.cohort_of_age(39) == "30-39"
    assert lb.cohort_of_age(40) == ">=40"
    assert lb.cohort_of_age(9) is None
    assert lb.cohort_of_age(101) is None


def test_age_from_phrase(rules):
    assert lb.label_age(prof(bio="25 años, porteña"), rules) == "18-29"
    assert lb.label_age(prof(bio="nacida en 1980"), rules) == "30-39"


def test_age_implausible_or_conflicting(rules):
    assert lb.label_age(prof(bio="500 años"), rules) is None
    assert lb.label_age(prof(bio="25 años pero nacida en 1950"), rules) is None
    # birth year outside the plausible window is ignored
    assert lb.label_age(prof(bio="nacido en 1492"), rules) is None


def _stance(bio, tweets, rules):
    return lb.label_stance(bio, [tokenize(t) for t in tweets],
                           rules.stance_seeds)


def test_stance_exclusive_seed(rules):
    assert _stance("", ["marchamos por #AbortoLegal"], rules) == "defense"
    assert _stance("", ["siempre #provida"], rules) == "opposition"


def test_stance_both_sides_abstains(rules):
    assert _stance("", ["#abortolegal vs #provida debate"], rules) is None
    assert _stance("", ["nada de hashtags"], rules) is None


def test_stance_hashtag_requires_token_equality(rules):
    # longer hashtag containing a seed must not match
    assert _stance("", ["#abortolegalseguro ya"], rules) is None


def test_stance_from_bio(rules):
    assert _stance("activista #provida", [], rules) == "opposition"


def test_leakage_columns(rules):
    cols = ["#abortolegal", "profile:#provida", "aborto", "santiago",
            "1995", "25", "w001", "profile:madre", "lexcat:family"]
    leaks = lb.leakage_columns(rules, cols)
    assert "#abortolegal" in leaks
    assert "profile:#provida" in leaks
    assert "santiago" in leaks          # gazetteer place
    assert "1995" in leaks and "25" in leaks
    assert "profile:madre" in leaks     # gender expression
    assert "w001" not in leaks
    assert "lexcat:family" not in leaks
    assert "aborto" not in leaks        # topic term is not a stance seed


def test_label_confidence_contract():
    with pytest.raises(ValueError):
        lb.Label("x", "rule", 0.9)
    lab = lb.Label("x", "predicted", 0.7)
    assert lab.confidence == 0.7


def test_manual_labels_override(tmp_path, rules):
    ls = lb.LabelSet()
    ls.set("u1", "gender", lb.Label("male", "rule", 1.0))
    f = tmp_path / "manual.tsv"
    f.write_text("u1\tgender\tfemale\nu2\tstance\tdefense\n")
    lb.import_manual_labels(ls, f)
    assert ls.get("u1", "gender").value == "female"
    assert ls.get("u1", "gender").provenance == "manual"
    assert ls.get("u2", "stance").value == "defense"
