"""Sparse user-by-feature matrix assembly.

The matrix is a horizontal concatenation of five blocks, in fixed order:
tweet terms, bio terms (including lexicon categories), profile meta features,
retweet edges, and directed (mention/reply/quote) edges. Rows and columns are
sorted by identifier so construction is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .corpus import Corpus, InteractionGraph
from .textproc import EMOJI, TermCounts, Token, registrable_domain, tokenize

BLOCKS = ("tweet_term", "bio_term", "profile_meta", "retweet_edge", "directed_edge")
FEATURE_TYPES = ("emoji", "hashtag", "mention", "url", "word",
                 "lexicon_category", "meta", "network")

_KIND_TO_TYPE = {"emoji": "emoji", "hashtag": "hashtag", "mention": "mention",
                 "url": "url", "word": "word"}


class MatrixError(Exception):
    pass


@dataclass(frozen=True)
class FeatureColumn:
    identifier: str
    block: str
    feature_type: str

    def __post_init__(self):
        if self.block not in BLOCKS:
            raise ValueError(f"unknown block {self.block!r}")
        if self.feature_type not in FEATURE_TYPES:
            raise ValueError(f"unknown feature type {self.feature_type!r}")
        if self.feature_type == "network" and not self.block.endswith("_edge"):
            raise ValueError("network features only allowed in edge blocks")


@dataclass(frozen=True)
class FeatureMatrix:
    rows: tuple[str, ...]
    columns: tuple[FeatureColumn, ...]
    cells: dict[tuple[int, int], float]   # only nonzero values stored
    period: Optional[tuple[int, int]] = None

    def __post_init__(self):
        ids = [c.identifier for c in self.columns]
        if len(set(ids)) != len(ids):
            raise MatrixError("duplicate column identifiers")
        for (i, j), v in self.cells.items():
            if v <= 0:
                raise MatrixError(f"stored cell ({i},{j}) must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), len(self.columns))

    def row_index(self) -> dict[str, int]:
        return {u: i for i, u in enumerate(self.rows)}

    def column_index(self) -> dict[str, int]:
        return {c.identifier: j for j, c in enumerate(self.columns)}

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.float64)
        for (i, j), v in self.cells.items():
            out[i, j] = v
        return out

    def column_identifiers(self) -> list[str]:
        return [c.identifier for c in self.columns]

    def save(self, path) -> None:
        """Write the documented text format: `#col` header lines, then
        `row col value` triplets in deterministic order."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("#format stancelab-matrix v1\n")
            if self.period is not None:
                fh.write(f"#period {self.period[0]} {self.period[1]}\n")
            for i, u in enumerate(self.rows):
                fh.write(f"#row {i} {u}\n")
            for j, c in enumerate(self.columns):
                fh.write(f"#col {j} {c.identifier} {c.block} {c.feature_type}\n")
            for (i, j) in sorted(self.cells):
                v = self.cells[(i, j)]
                fh.write(f"{i} {j} {v!r}\n")

    @classmethod
    def load(cls, path) -> "FeatureMatrix":
        rows: list[str] = []
        cols: list[FeatureColumn] = []
        cells: dict[tuple[int, int], float] = {}
        period = None
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != "#format stancelab-matrix v1":
                raise MatrixError(f"unrecognized matrix file {path}")
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("#period "):
                    _tag, a, b = line.split()
                    period = (int(a), int(b))
                elif line.startswith("#row "):
                    _tag, idx, user = line.split(" ", 2)
                    assert int(idx) == len(rows)
                    rows.append(user)
                elif line.startswith("#col "):
                    head, block, ftype = line.rsplit(" ", 2)
                    _tag, idx, ident = head.split(" ", 2)
                    assert int(idx) == len(cols)
                    cols.append(FeatureColumn(ident, block, ftype))
                else:
                    i, j, v = line.split(" ", 2)
                    cells[(int(i), int(j))] = float(v)
        return cls(tuple(rows), tuple(cols), cells, period)


def build_matrix(corpus: Corpus,
                 tweet_counts: TermCounts,
                 bio_counts: TermCounts,
                 lexicon_cat_counts: dict[str, dict[str, int]],
                 graph: InteractionGraph,
                 period: Optional[tuple[int, int]] = None,
                 min_in_degree: int = 5) -> FeatureMatrix:
    """Assemble the concatenated feature matrix for all corpus users.

    Edge columns are created only for targets with at least ``min_in_degree``
    distinct in-neighbours (per edge block), to bound matrix width. Raises
    :class:`MatrixError` if the graph mentions a user missing from the corpus.
    """
    for node in graph.nodes:
        if node not in corpus.users:
            raise MatrixError(f"graph user {node} not present in corpus")

    rows = tuple(sorted(corpus.users))
    ridx = {u: i for i, u in enumerate(rows)}

    columns: list[FeatureColumn] = []
    cells: dict[tuple[int, int], float] = {}

    def add_block(column_values: dict[str, dict[str, float]], block: str,
                  type_of: dict[str, str]) -> None:
        for ident in sorted(column_values):
            j = len(columns)
            columns.append(FeatureColumn(ident, block, type_of[ident]))
            for user_id, v in column_values[ident].items():
                if v > 0:
                    cells[(ridx[user_id], j)] = float(v)

    # block 1: tweet terms
    vals: dict[str, dict[str, float]] = {}
    types: dict[str, str] = {}
    for (user_id, tok), c in tweet_counts.counts.items():
        types[tok.surface] = _KIND_TO_TYPE[tok.kind]
        vals.setdefault(tok.surface, {})[user_id] = c
    add_block(vals, "tweet_term", types)

    # block 2: bio terms plus lexicon categories
    vals, types = {}, {}
    for (user_id, tok), c in bio_counts.counts.items():
        ident = f"profile:{tok.surface}"
        types[ident] = _KIND_TO_TYPE[tok.kind]
        vals.setdefault(ident, {})[user_id] = c
    for user_id, cats in lexicon_cat_counts.items():
        if user_id not in ridx:
            continue
        for cat, c in cats.items():
            ident = f"lexcat:{cat}"
            types[ident] = "lexicon_category"
            vals.setdefault(ident, {})[user_id] = c
    add_block(vals, "bio_term", types)

    # block 3: one-hot / count profile meta features
    vals, types = {}, {}
    for user_id in rows:
        prof = corpus.users[user_id]
        if prof.url:
            ident = f"home_domain:{registrable_domain(prof.url)}"
            types[ident] = "meta"
            vals.setdefault(ident, {})[user_id] = 1.0
        if prof.timezone:
            ident = f"timezone:{prof.timezone}"
            types[ident] = "meta"
            vals.setdefault(ident, {})[user_id] = 1.0
        n_emojis = sum(1 for t in tokenize(prof.bio or "") if t.kind == EMOJI)
        if n_emojis:
            types["n_emojis_bio"] = "meta"
            vals.setdefault("n_emojis_bio", {})[user_id] = float(n_emojis)
        for t in tokenize(prof.full_name or ""):
            if t.kind == EMOJI:
                ident = f"name:{t.surface}"
                types[ident] = "emoji"
                vals.setdefault(ident, {})[user_id] = 1.0
    add_block(vals, "profile_meta", types)

    # blocks 4 and 5: adjacency columns for well-connected targets
    retweet: dict[tuple[str, str], int] = {}
    directed: dict[tuple[str, str], int] = {}
    for (src, dst, kind), w in graph.edges.items():
        if kind == "retweet":
            retweet[(src, dst)] = retweet.get((src, dst), 0) + w
        else:
            directed[(src, dst)] = directed.get((src, dst), 0) + w

    for block, prefix, pairs in (("retweet_edge", "rt:", retweet),
                                 ("directed_edge", "at:", directed)):
        indeg: dict[str, set[str]] = {}
        for (src, dst) in pairs:
            indeg.setdefault(dst, set()).add(src)
        targets = {t for t, srcs in indeg.items() if len(srcs) >= min_in_degree}
        vals, types = {}, {}
        for (src, dst), w in pairs.items():
            if dst in targets:
                ident = prefix + dst
                types[ident] = "network"
                vals.setdefault(ident, {})[src] = float(w)
        add_block(vals, block, types)

    return FeatureMatrix(rows=rows, columns=tuple(columns), cells=cells,
                         period=period)


def drop_columns(matrix: FeatureMatrix, drop: set[str]) -> FeatureMatrix:
    """Remove the named columns; rows are preserved even if emptied."""
    keep = [(j, c) for j, c in enumerate(matrix.columns)
            if c.identifier not in drop]
    remap = {old: new for new, (old, _c) in enumerate(keep)}
    cells = {(i, remap[j]): v for (i, j), v in matrix.cells.items() if j in remap}
    return FeatureMatrix(rows=matrix.rows,
                         columns=tuple(c for _j, c in keep),
                         cells=cells, period=matrix.period)


def align_rows(a: FeatureMatrix, b: FeatureMatrix) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Restrict both matrices to their common users, in the same sorted order."""
    common = sorted(set(a.rows) & set(b.rows))

    def restrict(m: FeatureMatrix) -> FeatureMatrix:
        old = m.row_index()
        remap = {old[u]: i for i, u in enumerate(common)}
        cells = {(remap[i], j): v for (i, j), v in m.cells.items() if i in remap}
        return FeatureMatrix(rows=tuple(common), columns=m.columns,
                             cells=cells, period=m.period)

    return restrict(a), restrict(b)
