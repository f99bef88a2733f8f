import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from asrcorrect.nbest import NBestList
from asrcorrect.prompting import (
    EmptyOutput,
    Exemplar,
    PromptKind,
    PromptVariant,
    TemplateSet,
    UnparseableSelection,
    default_templates,
    fuzzy_select,
    parse_select,
    parse_uncon,
    render,
)

THREE = NBestList.from_texts("u", ["i saw a blue bird", "i saw a blew bird", "i saw the blue bird"])


def variant(kind):
    return default_templates().variant(kind)


def test_zero_shot_uncon_tags_in_order():
    p = render(THREE, variant("zero_shot_uncon"))
    positions = [p.user_text.index(f"<hypothesis{i}>") for i in (1, 2, 3)]
    assert positions == sorted(positions)
    for i, text in enumerate(THREE.texts, start=1):
        assert p.user_text.count(f"<hypothesis{i}>") == 1
        assert f"<hypothesis{i}> {text} </hypothesis{i}>" in p.user_text
    assert "<hypothesis4>" not in p.user_text
    assert "explanation" in p.system_text


def test_one_best_renders_single_tag():
    p = render(NBestList.from_texts("u", ["just one"]), variant("zero_shot_uncon"))
    assert p.user_text == "<hypothesis1> just one </hypothesis1>"


def test_select_uses_option_tags():
    p = render(THREE, variant("zero_shot_select"))
    assert "<option2> i saw a blew bird </option2>" in p.user_text
    assert "<hypothesis" not in p.user_text
    assert "<option?>" in p.system_text


def test_one_shot_prepends_exemplar():
    ex = default_templates().exemplar
    p = render(THREE, variant("one_shot_uncon"))
    assert p.user_text.index(ex.target_output) < p.user_text.index(THREE.texts[0])
    for i, text in enumerate(ex.nbest_texts, start=1):
        assert f"<hypothesis{i}> {text} </hypothesis{i}>" in p.user_text


def test_render_is_deterministic():
    assert render(THREE, variant("one_shot_uncon")) == render(THREE, variant("one_shot_uncon"))


def test_scores_not_shown():
    scored = NBestList.from_texts("u", ["a b", "a c"], scores=[-1.25, -3.5])
    p = render(scored, variant("zero_shot_uncon"))
    assert "1.25" not in p.user_text and "3.5" not in p.user_text


def test_variant_exemplar_required_iff_one_shot():
    with pytest.raises(ValueError):
        PromptVariant(PromptKind.ONE_SHOT_UNCON)
    with pytest.raises(ValueError):
        PromptVariant(PromptKind.ZERO_SHOT_SELECT, Exemplar(("a",), "a"))
    with pytest.raises(ValueError):
        Exemplar((), "a")


def test_template_digest_tracks_content(tmp_path):
    base = default_templates()
    for f in base.directory.iterdir():
        (tmp_path / f.name).write_text(f.read_text())
    assert TemplateSet(tmp_path).digest == base.digest
    path = tmp_path / "zero_shot_uncon.txt"
    path.write_text(path.read_text().replace("only", "ONLY"))
    changed = TemplateSet(tmp_path)
    assert changed.digest != base.digest
    assert render(THREE, changed.variant("zero_shot_uncon"), changed) != render(THREE, variant("zero_shot_uncon"))


def test_malformed_template(tmp_path):
    for f in default_templates().directory.iterdir():
        (tmp_path / f.name).write_text(f.read_text())
    (tmp_path / "zero_shot_select.txt").write_text("no sections here")
    with pytest.raises(ValueError, match="section"):
        TemplateSet(tmp_path)


sentences = st.lists(st.text(alphabet="abcdef ", min_size=1, max_size=15), min_size=1, max_size=10)


@given(sentences, st.sampled_from(list(PromptKind)))
def test_every_hypothesis_appears_once(texts, kind):
    utt = NBestList.from_texts("u", texts)
    tag = "option" if kind is PromptKind.ZERO_SHOT_SELECT else "hypothesis"
    user = render(utt, variant(kind)).user_text
    if kind is PromptKind.ONE_SHOT_UNCON:
        user = user.split("Now correct the following.", 1)[1]
    for i, text in enumerate(texts, start=1):
        assert user.count(f"<{tag}{i}> {text} </{tag}{i}>") == 1


# -- parse_uncon -----------------------------------------------------------------


@pytest.mark.parametrize(
    "reply, expected",
    [
        ("<hypothesis> the corrected text </hypothesis>", "the corrected text"),
        ("the corrected text", "the corrected text"),
        ("  <hypothesis3>the corrected text</hypothesis3>\n", "the corrected text"),
        ('"the corrected text"', "the corrected text"),
        ("Corrected transcription: the corrected text", "the corrected text"),
        ("the corrected\ntext", "the corrected text"),
        ("the corrected text\n\nI changed one word.", "the corrected text"),
        ("\n\n<hypothesis1>\n\nthe corrected text\n\n</hypothesis1>", "the corrected text"),
    ],
)
def test_parse_uncon(reply, expected):
    assert parse_uncon(reply) == expected


@pytest.mark.parametrize("reply", ["", "   \n  ", "<hypothesis1> </hypothesis1>", '""'])
def test_parse_uncon_empty(reply):
    with pytest.raises(EmptyOutput):
        parse_uncon(reply)


# -- parse_select ------------------------------------------------------------------


@pytest.mark.parametrize(
    "reply, k",
    [
        ("<option2> the text </option2>", 2),
        ("option 1", 1),
        ("I choose Option #3 because it reads best", 3),
        ("<Option5>x</Option5>", 5),
    ],
)
def test_parse_select(reply, k):
    assert parse_select(reply, 5) == k


@pytest.mark.parametrize("reply", ["<option7> ... </option7>", "<option0> x", "the first one", "<option?> x </option?>", ""])
def test_parse_select_unparseable(reply):
    with pytest.raises(UnparseableSelection):
        parse_select(reply, 5)


@given(st.integers(1, 10), st.data())
def test_parse_select_round_trip(n, data):
    k = data.draw(st.integers(1, n))
    text = data.draw(st.text(alphabet="abc xyz", max_size=20))
    assert parse_select(f"<option{k}> {text} </option{k}>", n) == k


def test_fuzzy_select_exact_text():
    assert fuzzy_select("i saw the blue bird", THREE.texts) == 3


def test_fuzzy_select_ambiguous_or_unrelated():
    texts = ["a b c", "a b d"]
    assert fuzzy_select("a b", texts) is None
    assert fuzzy_select("completely unrelated words", ["x y", "z w"]) is None
    assert fuzzy_select("", texts) is None


def test_fuzzy_select_duplicates_not_ambiguous():
    assert fuzzy_select("a b", ["a b c", "a b c", "x"]) == 1
