import collections

from app.classes import describe, get_class


def test_get_class():
    assert get_class("collections.OrderedDict") is collections.OrderedDict


def test_get_class_missing_module():
    assert get_class("no_such_module.Thing") is None


def test_describe():
    assert describe("collections.OrderedDict") == "OrderedDict"


def test_describe_invalid_arguments():
    assert describe(None) == "<unknown>"
