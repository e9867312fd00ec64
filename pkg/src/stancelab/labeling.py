"""Rule-based bootstrapping of demographic and stance labels.

All rules live in external files so the machinery stays issue-agnostic:
a gazetteer for locations, first-name lists and bio expressions for gender,
age/birth-year phrases for cohorts, and seed patterns for stances. Every rule
abstains (returns None) instead of guessing when signals conflict.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import regex

from .corpus import UserProfile
from .textproc import Token

STANCES = ("defense", "opposition")
COHORTS = ("<18", "18-29", "30-39", ">=40")

# birth years outside this window are treated as non-birth-year numbers
BIRTH_YEAR_RANGE = (1920, 2010)


class RuleFileError(Exception):
    pass


@dataclass(frozen=True)
class RuleSet:
    gazetteer: dict[str, str]                       # place (casefolded) -> country
    name_genders: dict[str, str]                    # first name (casefolded) -> gender
    gender_expressions: tuple[tuple["regex.Pattern", str], ...]
    age_patterns: tuple[tuple["regex.Pattern", str], ...]  # (pattern, "age"|"birth_year")
    stance_seeds: dict[str, dict[str, tuple[str, ...]]]    # stance -> scope -> patterns
    reference_year: int = 2017                      # epoch for birth-year cohorts

    def __post_init__(self):
        if set(self.stance_seeds) != set(STANCES):
            raise ValueError(f"stance_seeds must have exactly stances {STANCES}")


@dataclass(frozen=True)
class Label:
    value: str
    provenance: str       # "rule" | "manual" | "predicted"
    confidence: float

    def __post_init__(self):
        if self.provenance in ("rule", "manual") and self.confidence != 1.0:
            raise ValueError("rule/manual labels must have confidence 1.0")


@dataclass
class LabelSet:
    """Per-user optional labels, at most one per attribute."""
    labels: dict[str, dict[str, Label]] = field(default_factory=dict)

    ATTRIBUTES = ("location", "gender", "age_cohort", "stance")

    def set(self, user_id: str, attribute: str, label: Label) -> None:
        if attribute not in self.ATTRIBUTES:
            raise ValueError(f"unknown attribute {attribute!r}")
        self.labels.setdefault(user_id, {})[attribute] = label

    def get(self, user_id: str, attribute: str) -> Optional[Label]:
        return self.labels.get(user_id, {}).get(attribute)

    def users_with(self, attribute: str) -> list[str]:
        return sorted(u for u, d in self.labels.items() if attribute in d)


def load_gazetteer(path) -> dict[str, str]:
    """`place<TAB>country` lines."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            place, country = line.split("\t", 1)
            out[place.strip().casefold()] = country.strip()
    return out


def load_name_genders(path) -> dict[str, str]:
    """`name<TAB>gender` lines."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            name, gender = line.split("\t", 1)
            out[name.strip().casefold()] = gender.strip()
    return out


def load_attribute_patterns(path):
    """Pattern file: `attribute<TAB>value<TAB>pattern` per line.

    Returns (gender_expressions, age_patterns) with patterns compiled
    case-insensitively.
    """
    genders: list[tuple["regex.Pattern", str]] = []
    ages: list[tuple["regex.Pattern", str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            try:
                attribute, value, pattern = line.split("\t", 2)
            except ValueError as exc:
                raise RuleFileError(f"{path}:{lineno}: expected 3 fields") from exc
            try:
                pat = regex.compile(pattern, regex.IGNORECASE)
            except regex.error as exc:
                raise RuleFileError(f"{path}:{lineno}: bad pattern: {exc}") from exc
            if attribute == "gender":
                genders.append((pat, value))
            elif attribute == "age":
                if value not in ("age", "birth_year"):
                    raise RuleFileError(f"{path}:{lineno}: bad age value {value!r}")
                ages.append((pat, value))
            else:
                raise RuleFileError(f"{path}:{lineno}: unknown attribute {attribute!r}")
    return tuple(genders), tuple(ages)


def load_stance_seeds(path) -> dict[str, dict[str, tuple[str, ...]]]:
    """Seed file: `stance<TAB>scope<TAB>pattern` per line, scope in {bio, tweet}."""
    seeds: dict[str, dict[str, list[str]]] = {
        s: {"bio": [], "tweet": []} for s in STANCES
    }
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            try:
                stance, scope, pattern = line.split("\t", 2)
            except ValueError as exc:
                raise RuleFileError(f"{path}:{lineno}: expected 3 fields") from exc
            if stance not in STANCES or scope not in ("bio", "tweet"):
                raise RuleFileError(f"{path}:{lineno}: bad stance/scope")
            seeds[stance][scope].append(pattern.strip().lower())
    return {s: {sc: tuple(p) for sc, p in d.items()} for s, d in seeds.items()}


def load_ruleset(gazetteer_path, names_path, patterns_path, seeds_path,
                 reference_year: int = 2017) -> RuleSet:
    genders, ages = load_attribute_patterns(patterns_path)
    return RuleSet(
        gazetteer=load_gazetteer(gazetteer_path),
        name_genders=load_name_genders(names_path),
        gender_expressions=genders,
        age_patterns=ages,
        stance_seeds=load_stance_seeds(seeds_path),
        reference_year=reference_year,
    )


def label_location(profile: UserProfile, gazetteer: dict[str, str]) -> Optional[str]:
    """Country from the free-text location, or None if absent or ambiguous."""
    text = (profile.location_text or "").strip()
    if not text:
        return None
    candidates = [text.casefold()]
    candidates += [part.strip().casefold() for part in text.split(",")]
    countries = {gazetteer[c] for c in candidates if c in gazetteer}
    if len(countries) == 1:
        return next(iter(countries))
    return None


def label_gender(profile: UserProfile, rules: RuleSet) -> Optional[str]:
    """Gender from the first name, falling back to bio expressions."""
    name = (profile.full_name or "").strip()
    if name:
        first = name.split()[0].casefold()
        if first in rules.name_genders:
            return rules.name_genders[first]
    bio = profile.bio or ""
    hits = {g for pat, g in rules.gender_expressions if pat.search(bio)}
    if len(hits) == 1:
        return next(iter(hits))
    return None


def cohort_of_age(age: int) -> Optional[str]:
    """Closed-open cohorts: [0,18), [18,30), [30,40), [40,inf)."""
    if age < 10 or age > 100:
        return None
    if age < 18:
        return "<18"
    if age < 30:
        return "18-29"
    if age < 40:
        return "30-39"
    return ">=40"


def label_age(profile: UserProfile, rules: RuleSet) -> Optional[str]:
    """Age cohort from bio phrases; implausible or conflicting extractions
    abstain."""
    bio = profile.bio or ""
    if not bio:
        return None
    cohorts = set()
    for pat, kind in rules.age_patterns:
        for m in pat.finditer(bio):
            try:
                value = int(m.group(1))
            except (IndexError, ValueError):
                continue
            if kind == "birth_year":
                lo, hi = BIRTH_YEAR_RANGE
                if not (lo <= value <= hi):
                    continue
                value = rules.reference_year - value
            cohort = cohort_of_age(value)
            if cohort is not None:
                cohorts.add(cohort)
    if len(cohorts) == 1:
        return next(iter(cohorts))
    return None


def _seed_hits(seed: str, bio: str, tweet_tokens: Iterable[Token],
               tweet_text: str, scope: str) -> bool:
    if scope == "bio":
        return seed in bio
    if seed.startswith(("#", "@")):
        return any(t.surface == seed for t in tweet_tokens
                   if t.kind in ("hashtag", "mention"))
    return seed in tweet_text


def label_stance(user_bio: str, user_tweets: list[list[Token]],
                 seeds: dict[str, dict[str, tuple[str, ...]]]) -> Optional[str]:
    """Stance only when seeds of exactly one stance match, across bio and
    tweets; hashtag/mention seeds require token equality, phrases match as
    case-folded substrings."""
    bio = (user_bio or "").casefold()
    flat_tokens = [t for toks in user_tweets for t in toks]
    tweet_text = " ".join(t.surface for t in flat_tokens)
    hits = {s: 0 for s in STANCES}
    for stance in STANCES:
        for scope in ("bio", "tweet"):
            for seed in seeds[stance][scope]:
                if _seed_hits(seed, bio, flat_tokens, tweet_text, scope):
                    hits[stance] += 1
    matched = [s for s in STANCES if hits[s] > 0]
    if len(matched) == 1:
        return matched[0]
    return None


_NUMERIC_LEAK_RE = regex.compile(r"^(?:\d{2}|\d{4})$")


def leakage_columns(ruleset: RuleSet, columns: Iterable[str]) -> set[str]:
    """Columns that would leak the labeling rules into the classifier.

    Includes every stance seed term present in the vocabulary, columns hit by
    gender expressions, gazetteer place names, and bare 2- or 4-digit numeric
    tokens (used for age labeling).
    """
    seeds = set()
    for stance in STANCES:
        for scope in ("bio", "tweet"):
            seeds.update(ruleset.stance_seeds[stance][scope])
    out = set()
    for col in columns:
        base = col.split(":", 1)[1] if ":" in col else col
        low = base.lower()
        if low in seeds:
            out.add(col)
            continue
        if _NUMERIC_LEAK_RE.match(low):
            out.add(col)
            continue
        if low.casefold() in ruleset.gazetteer:
            out.add(col)
            continue
        if any(pat.search(base) for pat, _g in ruleset.gender_expressions):
            out.add(col)
    return out


def apply_rules(corpus, rules: RuleSet, tweet_tokens=None) -> LabelSet:
    """Run all rule labelers over every corpus user.

    ``tweet_tokens`` maps user id to per-post token lists; computed from the
    corpus when omitted.
    """
    from .textproc import tokenize
    if tweet_tokens is None:
        tweet_tokens = {}
        for p in corpus.posts:
            tweet_tokens.setdefault(p.author_id, []).append(tokenize(p.text))

    out = LabelSet()
    for user_id in sorted(corpus.users):
        prof = corpus.users[user_id]
        loc = label_location(prof, rules.gazetteer)
        if loc is not None:
            out.set(user_id, "location", Label(loc, "rule", 1.0))
        gen = label_gender(prof, rules)
        if gen is not None:
            out.set(user_id, "gender", Label(gen, "rule", 1.0))
        age = label_age(prof, rules)
        if age is not None:
            out.set(user_id, "age_cohort", Label(age, "rule", 1.0))
        stance = label_stance(prof.bio or "", tweet_tokens.get(user_id, []),
                              rules.stance_seeds)
        if stance is not None:
            out.set(user_id, "stance", Label(stance, "rule", 1.0))
    return out


def import_manual_labels(label_set: LabelSet, path) -> LabelSet:
    """Merge manual labels from a `user<TAB>attribute<TAB>value` file.

    Manual labels override rule labels for the same attribute.
    """
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                user_id, attribute, value = line.split("\t", 2)
            except ValueError as exc:
                raise RuleFileError(f"{path}:{lineno}: expected 3 fields") from exc
            label_set.set(user_id, attribute, Label(value, "manual", 1.0))
    return label_set
