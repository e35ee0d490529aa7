"""Runtime controller called by instrumented try statements.

Instrumented code calls enter/inject/caught/escape/leave; the test runner calls
install/begin_test/end_test. Configuration is read from the environment:

    TRACE_PATH  file receiving one JSON record per line (append-only)
    MODE        "standard" or "inject"
    PLAN_SITE   site id targeted for injection
    PLAN_TYPE   exception type expression to inject, as declared by the handler
    SC_CONFIG   JSON file listing the application source files
"""

import json
import os
import sys
import threading

MESSAGE = "short-circuit-injected"
INJECTED_ATTR = "_shortcircuit_injected"
XID_ATTR = "_shortcircuit_xid"

MODE = os.environ.get("MODE", "")
PLAN_SITE = os.environ.get("PLAN_SITE") or None
PLAN_TYPE = os.environ.get("PLAN_TYPE") or None
TRACE_PATH = os.environ.get("TRACE_PATH") or None

_lock = threading.RLock()
_seq = 0
_xid = 0
_fd = None
_current_test = None
_bubbled = []
_app_files = frozenset()
_app_cache = {}


def install():
    """Opens the trace and loads the app file list. Raises OSError when the
    trace cannot be written."""
    global _fd, _app_files
    if TRACE_PATH is not None and _fd is None:
        _fd = os.open(TRACE_PATH, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
    config = os.environ.get("SC_CONFIG")
    if config:
        with open(config, encoding="utf-8") as fh:
            files = json.load(fh).get("app_files", [])
        _app_files = frozenset(os.path.realpath(os.path.abspath(f)) for f in files)
    sys.settrace(_global_tracer)
    threading.settrace(_global_tracer)


def _emit(record):
    global _seq
    with _lock:
        _seq += 1
        record["seq"] = _seq
        if _fd is not None:
            line = json.dumps(record, separators=(",", ":")) + "\n"
            os.write(_fd, line.encode("utf-8"))


def _xid_of(exc):
    global _xid
    xid = getattr(exc, XID_ATTR, None)
    if xid is None:
        with _lock:
            _xid += 1
            xid = _xid
        try:
            setattr(exc, XID_ATTR, xid)
        except Exception:
            pass
    return xid


def _type_name(exc):
    return type(exc).__name__


# -- try statement hooks -----------------------------------------------------


class _Token(object):
    __slots__ = ("sites", "state", "ordinal", "exc")

    def __init__(self, sites):
        self.sites = sites
        self.state = None
        self.ordinal = None
        self.exc = None


def enter(sites):
    return _Token(sites)


def inject(token):
    if MODE != "inject" or _current_test is None or PLAN_SITE not in token.sites:
        return
    exc, how = make_injectable(PLAN_TYPE, sys._getframe(1))
    if exc is None:
        _emit({"ev": "uninjectable", "site": PLAN_SITE, "test": _current_test,
               "ex": PLAN_TYPE, "reason": how})
        return
    try:
        setattr(exc, INJECTED_ATTR, True)
    except Exception:
        pass
    _emit({"ev": "inject", "site": PLAN_SITE, "test": _current_test,
           "ex": PLAN_TYPE, "how": how})
    raise exc


def caught(token, ordinal):
    if token.state is None:
        token.state = "white"
        token.ordinal = ordinal
        token.exc = sys.exc_info()[1]


def escape(token, exc):
    if isinstance(exc, GeneratorExit):
        return
    if token.state is None:
        token.state = "blue"
        token.exc = exc


def leave(token):
    exc = token.exc
    name = xid = None
    injected = False
    if exc is not None:
        name = _type_name(exc)
        xid = _xid_of(exc)
        injected = bool(getattr(exc, INJECTED_ATTR, False))
    for i, site in enumerate(token.sites):
        if token.state is None:
            kind = "pink"
        elif token.state == "white" and i == token.ordinal:
            kind = "white"
        else:
            kind = "blue"
        _emit({"ev": "usage", "site": site, "test": _current_test, "kind": kind,
               "ex": name, "xid": xid, "inj": injected})


# -- typed exception construction ------------------------------------------


def _resolve(expr, frame):
    if frame is None:
        import builtins
        namespace, local = vars(builtins), None
    else:
        namespace, local = frame.f_globals, frame.f_locals
    try:
        obj = eval(expr, namespace, local)
    except Exception as e:
        return None, "cannot resolve %s: %s" % (expr, e)
    if isinstance(obj, tuple):
        obj = obj[0] if obj else None
    if not (isinstance(obj, type) and issubclass(obj, BaseException)):
        return None, "%s is not an exception type" % expr
    return obj, None


def make_injectable(expr, frame=None):
    """Returns (instance, how) or (None, reason).

    Tries the message constructor, then the zero-argument constructor, then a
    synthesized subclass whose constructor needs nothing."""
    cls, err = _resolve(expr, frame)
    if cls is None:
        return None, err
    for how, build in (("message", lambda: cls(MESSAGE)), ("no-arg", lambda: cls())):
        try:
            exc = build()
        except Exception:
            continue
        if isinstance(exc, cls):
            return exc, how
    body = {"__module__": __name__, "__init__": _synth_init}
    for name in getattr(cls, "__abstractmethods__", ()):
        body[name] = _abstract_stub
    try:
        sub = type("Injected" + cls.__name__, (cls,), body)
        exc = sub()
    except Exception as e:
        return None, "no usable constructor for %s: %s" % (expr, e)
    return exc, "synthesized"


def _synth_init(self, *args, **kwargs):
    BaseException.__init__(self, MESSAGE)


def _abstract_stub(self, *args, **kwargs):
    return None


# -- test boundaries and bubbling detection -----------------------------------


def _is_app(code):
    filename = code.co_filename
    hit = _app_cache.get(filename)
    if hit is None:
        hit = os.path.realpath(os.path.abspath(filename)) in _app_files
        _app_cache[filename] = hit
    return hit


def _global_tracer(frame, event, arg):
    code = frame.f_code
    if _current_test is None or code.co_filename == __file__ or _is_app(code):
        return None
    frame.f_trace_lines = False
    return _local_tracer


def _local_tracer(frame, event, arg):
    if event == "exception" and _current_test is not None:
        _, exc, tb = arg
        if exc is not None and not any(e is exc for e in _bubbled):
            _check_bubble(frame, exc, tb)
    return _local_tracer


def _check_bubble(frame, exc, tb):
    t = tb.tb_next if tb is not None else None
    while t is not None:
        if _is_app(t.tb_frame.f_code):
            break
        t = t.tb_next
    else:
        return
    f = frame.f_back
    while f is not None:
        if _is_app(f.f_code):
            return
        f = f.f_back
    _bubbled.append(exc)
    _emit({"ev": "bubble", "site": None, "test": _current_test, "kind": None,
           "ex": _type_name(exc), "xid": _xid_of(exc),
           "inj": bool(getattr(exc, INJECTED_ATTR, False))})


def begin_test(test_id):
    global _current_test
    del _bubbled[:]
    _current_test = test_id
    _emit({"ev": "begin", "test": test_id})


def end_test(test_id, outcome):
    global _current_test
    _emit({"ev": "end", "test": test_id, "outcome": outcome})
    _current_test = None
    del _bubbled[:]
