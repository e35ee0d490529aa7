import importlib


def get_class(qualified_name):
    try:
        module_name, _, attr = qualified_name.rpartition(".")
        return getattr(importlib.import_module(module_name), attr)
    except ImportError:
        return None


def describe(qualified_name):
    try:
        return get_class(qualified_name).__name__
    except AttributeError:
        return "<unknown>"
