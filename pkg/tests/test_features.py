import pytest

from stancelab import corpus as cm
from stancelab import features as ft
from stancelab import textproc as tp


def small_corpus():
    users = {
        "a": cm.UserProfile(user_id="a", bio="madre 💚", url="http://blog.cl",
                            timezone="Santiago", full_name="Ana ✨"),
        "b": cm.UserProfile(user_id="b"),
        "c": cm.UserProfile(user_id="c"),
    }
    posts = (
        cm.MicroPost("p1", "a", 1, "aborto legal aborto"),
        cm.MicroPost("p2", "b", 2, "aborto no", retweet_of="a"),
        cm.MicroPost("p3", "c", 3, "hola", directed_at=(("a", "mention"),)),
    )
    return cm.Corpus(posts=posts, users=users, time_range=(1, 4))


def build(min_in_degree=1):
    c = small_corpus()
    tweet = tp.term_counts(c, "tweet", 1)
    bio = tp.term_counts(c, "bio", 1)
    lex = tp.lexicon_counts(tp.bio_tokens(c),
                            tp.Lexicon(categories={"family": frozenset({"madre"})}))
    g = cm.build_interaction_graph(c)
    return ft.build_matrix(c, tweet, bio, lex, g, min_in_degree=min_in_degree)


def test_matrix_values_hand_checked():
    m = build()
    dense = m.to_dense()
    ridx, cidx = m.row_index(), m.column_index()
    assert m.rows == ("a", "b", "c")
    assert dense[ridx["a"], cidx["aborto"]] == 2
    assert dense[ridx["b"], cidx["aborto"]] == 1
    assert dense[ridx["a"], cidx["profile:madre"]] == 1
    assert dense[ridx["a"], cidx["profile:💚"]] == 1
    assert dense[ridx["a"], cidx["lexcat:family"]] == 1
    assert dense[ridx["a"], cidx["home_domain:blog.cl"]] == 1
    assert dense[ridx["a"], cidx["timezone:Santiago"]] == 1
    assert dense[ridx["a"], cidx["n_emojis_bio"]] == 1
    assert dense[ridx["a"], cidx["name:✨"]] == 1
    assert dense[ridx["b"], cidx["rt:a"]] == 1
    assert dense[ridx["c"], cidx["at:a"]] == 1


def test_block_order_and_types():
    m = build()
    blocks = [c.block for c in m.columns]
    # blocks appear in the fixed order
    order = {b: i for i, b in enumerate(ft.BLOCKS)}
    assert blocks == sorted(blocks, key=order.__getitem__)
    by_id = {c.identifier: c for c in m.columns}
    assert by_id["aborto"].feature_type == "word"
    assert by_id["profile:💚"].feature_type == "emoji"
    assert by_id["lexcat:family"].feature_type == "lexicon_category"
    assert by_id["rt:a"].feature_type == "network"


def test_min_in_degree_prunes_edges():
    m = build(min_in_degree=2)
    ids = set(m.column_identifiers())
    assert "rt:a" not in ids and "at:a" not in ids


def test_graph_user_outside_corpus_fatal():
    c = small_corpus()
    tweet = tp.term_counts(c, "tweet", 1)
    bio = tp.term_counts(c, "bio", 1)
    g = cm.InteractionGraph(nodes=frozenset({"ghost"}), edges={})
    with pytest.raises(ft.MatrixError):
        ft.build_matrix(c, tweet, bio, {}, g)


def test_save_load_round_trip(tmp_path):
    m = build()
    f = tmp_path / "m.txt"
    m.save(f)
    m2 = ft.FeatureMatrix.load(f)
    assert m2.rows == m.rows
    assert m2.columns == m.columns
    assert m2.cells == m.cells
    # byte-identical re-save
    f2 = tmp_path / "m2.txt"
    m2.save(f2)
    assert f.read_bytes() == f2.read_bytes()


def test_drop_columns():
    m = build()
    dropped = ft.drop_columns(m, {"aborto"})
    assert "aborto" not in dropped.column_identifiers()
    assert dropped.shape[0] == m.shape[0]
    assert dropped.shape[1] == m.shape[1] - 1
    # remaining values survive the remap
    cidx = dropped.column_index()
    ridx = dropped.row_index()
    assert dropped.to_dense()[ridx["a"], cidx["legal"]] == 1


def test_align_rows():
    m = build()
    other = ft.FeatureMatrix(rows=("b", "z"), columns=m.columns,
                             cells={(0, 0): 1.0})
    a, b = ft.align_rows(m, other)
    assert a.rows == b.rows == ("b",)
    assert a.columns == m.columns


def test_positive_cell_contract():
    with pytest.raises(ft.MatrixError):
        ft.FeatureMatrix(rows=("a",),
                         columns=(ft.FeatureColumn("x", "tweet_term", "word"),),
                         cells={(0, 0): 0.0})
