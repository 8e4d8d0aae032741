import pytest
from hypothesis import given, strategies as st

from prodmap.parsing import (InvalidLabelError, parse_bare_label,
                             parse_structured_output, format_score,
                             render_structured_output)


def test_well_formed():
    parsed = parse_structured_output("<reason>brand and count match</reason><label>1</label>")
    assert parsed.reasoning == "brand and count match"
    assert parsed.label == 1
    assert parsed.format_ok == 1


def test_label_only_recovers_label():
    parsed = parse_structured_output("<label>1</label>")
    assert parsed.format_ok == 0
    assert parsed.label == 1
    assert parsed.reasoning is None


def test_non_binary_label_body():
    parsed = parse_structured_output("<reason>x</reason><label>yes</label>")
    assert parsed.format_ok == 0
    assert parsed.label is None
    assert parsed.reasoning == "x"


def test_reversed_order_fails_format():
    parsed = parse_structured_output("<label>1</label><reason>x</reason>")
    assert parsed.format_ok == 0
    assert parsed.label == 1


def test_duplicate_label_tags_fail_format():
    parsed = parse_structured_output("<reason>x</reason><label>1</label><label>0</label>")
    assert parsed.format_ok == 0
    assert parsed.label == 1  # best effort takes the first tag


def test_case_insensitive_tags():
    parsed = parse_structured_output("<REASON>x</Reason><Label>0</LABEL>")
    assert parsed.format_ok == 1
    assert parsed.label == 0


def test_surrounding_text_tolerated():
    parsed = parse_structured_output(
        "Sure, here you go:\n<reason>same brand</reason><label>1</label>\nThanks!")
    assert parsed.format_ok == 1
    assert parsed.label == 1


def test_angle_bracket_inside_reason_is_verbatim():
    parsed = parse_structured_output("<reason>a < b and c > d</reason><label>0</label>")
    assert parsed.format_ok == 1
    assert parsed.reasoning == "a < b and c > d"


def test_empty_reason_block_is_still_compliant():
    parsed = parse_structured_output("<reason></reason><label>1</label>")
    assert parsed.format_ok == 1
    assert parsed.reasoning == ""


def test_label_body_trimmed():
    parsed = parse_structured_output("<reason>x</reason><label> 0 \n</label>")
    assert parsed.format_ok == 1
    assert parsed.label == 0


def test_format_score_matches_field():
    good = parse_structured_output("<reason>x</reason><label>1</label>")
    bad = parse_structured_output("<label>1</label><reason>x</reason>")
    assert format_score(good) == 1
    assert format_score(bad) == 0


@pytest.mark.parametrize("text,expected", [("1", 1), ("0", 0), (" 0\n", 0), ("\t1 ", 1)])
def test_parse_bare_label_ok(text, expected):
    assert parse_bare_label(text) == expected


@pytest.mark.parametrize("text", ["maybe 1", "", "10", "yes", "1.0", "0 1"])
def test_parse_bare_label_rejects(text):
    with pytest.raises(InvalidLabelError):
        parse_bare_label(text)


@given(st.text(alphabet=st.characters(blacklist_characters="<>"), max_size=200),
       st.sampled_from([0, 1]))
def test_round_trip(reasoning, label):
    parsed = parse_structured_output(render_structured_output(reasoning, label))
    assert parsed.format_ok == 1
    assert parsed.reasoning == reasoning
    assert parsed.label == label


@given(st.text(max_size=300))
def test_parse_is_pure_and_total(text):
    first = parse_structured_output(text)
    second = parse_structured_output(text)
    assert first == second
    if first.format_ok == 1:
        assert first.label is not None
        assert first.reasoning is not None
