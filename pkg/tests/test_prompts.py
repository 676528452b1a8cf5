import math
from pathlib import Path

import pytest

from ucascade.core import MOSI, SIMS, DatasetScale, SampleRecord
from ucascade.errors import EmptyText, InvalidInput, SchemaError, UnsupportedScale
from ucascade.prompts import build_base_prompt, build_enhanced_prompt, format_data_block, parse_template

GOLDEN = Path(__file__).parent / "golden"
CASE_TEXT = "I feel that my career has already hit its ceiling here."


def test_mosi_base_prompt():
    p = build_base_prompt(SampleRecord("m1", "great movie", MOSI))
    assert p.startswith(
        "Sentiment scores range from -3 to +3, where -3 is highly negative, +3 is highly positive, "
        "and 0 is neutral. The speaker said 'great movie'.")
    assert p.endswith("Directly answer the sentiment score.")
    assert "{" not in p


def test_sims_base_prompt():
    assert build_base_prompt(SampleRecord("s1", "ok", SIMS)).startswith("Sentiment scores range from -1 to +1")


def test_empty_text():
    with pytest.raises(EmptyText):
        build_base_prompt(SampleRecord("s1", "  ", SIMS))


def test_unknown_scale():
    with pytest.raises(UnsupportedScale):
        build_base_prompt(SampleRecord("x", "hi", DatasetScale("yelp", -2.0, 2.0)))


def test_data_block():
    assert format_data_block(0.0, 1.10, -0.2, 0.51) == (
        "small_prediction=0.0000, small_uncertainty=1.1000, mllm_prediction=-0.2000, mllm_uncertainty=0.5100")
    assert format_data_block(-0.0, 0.0, 0.0, 0.0).startswith("small_prediction=0.0000,")


def test_enhanced_matches_golden():
    sample = SampleRecord("sims_case_study", CASE_TEXT, SIMS)
    got = build_enhanced_prompt(sample, 0.0, 1.10, -0.2, 0.51)
    assert got == (GOLDEN / "case_study_enhanced.txt").read_text(encoding="utf-8").rstrip("\n")
    assert got == build_enhanced_prompt(sample, 0.0, 1.10, -0.2, 0.51)
    assert got.startswith(build_base_prompt(sample) + " Now, the model is required to re-predict")


def test_enhanced_rejects_nan():
    with pytest.raises(InvalidInput):
        build_enhanced_prompt(SampleRecord("s", "t", SIMS), 0.0, math.nan, 0.1, 0.2)


def test_text_with_braces_is_not_expanded():
    p = build_enhanced_prompt(SampleRecord("s", "I said {data} and {text}", SIMS), 0.1, 0.2, 0.3, 0.4)
    assert "'I said {data} and {text}'" in p
    assert p.count("small_prediction=") == 1


def test_template_parsing():
    t = parse_template("# c\nbase: A {text}\nrepredict: B {data}\n")
    assert (t.base, t.repredict) == ("A {text}", "B {data}")
    with pytest.raises(SchemaError):
        parse_template("base: A {text} {oops}\nrepredict: B {data}\n")
    with pytest.raises(SchemaError):
        parse_template("base: A {text}\n")
