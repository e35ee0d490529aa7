from app.props import format_key, lookup


def test_known_property():
    assert lookup("db.host") == "localhost"


def test_unknown_property():
    assert lookup("db.user") == "missing property"


def test_format_key():
    assert format_key("  DB.Port ") == "db.port"
