import pytest

from trafficcast.config import ConfigError, load_config, parse_config, parse_value, section


def test_parse_basic():
    cfg = parse_config("a = 1\n# comment\nb=two # trailing\n\na = 3\n")
    assert cfg == {"a": "3", "b": "two"}


def test_continuation_lines():
    cfg = parse_config("events = x,\n    y,\n\tz\nnext = 1\n")
    assert cfg == {"events": "x, y, z", "next": "1"}


def test_errors(tmp_path):
    with pytest.raises(ConfigError, match=":2:"):
        parse_config("a = 1\nnonsense\n")
    with pytest.raises(ConfigError):
        parse_config("= 4\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


def test_section():
    assert section({"rf.n": "1", "rfx.n": "2", "seed": "3"}, "rf") == {"n": "1"}


@pytest.mark.parametrize("text,value", [("42", 42), ("0.75", 0.75), ("none", None), ("true", True),
                                        ("off", False), ("(16, 8)", (16, 8)), ("sqrt", "sqrt"),
                                        ("(16,)", (16,))])
def test_parse_value(text, value):
    assert parse_value(text) == value
