from app.dashboard import Dashboard


def test_render_complete():
    d = Dashboard({"x": "1", "y": "2"})
    assert d.render() == "x=1 y=2"
    assert d.health() == "ok"


def test_render_unparseable():
    d = Dashboard({"x": "a", "y": "b"})
    assert d.render() == "x=? y=?"


def test_health_degraded_when_data_missing():
    d = Dashboard({})
    d.render()
    assert d.health() == "degraded"
