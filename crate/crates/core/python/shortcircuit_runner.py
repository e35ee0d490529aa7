"""Minimal test runner producing JUnit XML, one verdict per test.

Discovers test_*.py / *_test.py files, plain `test*` functions and
unittest.TestCase methods. Test ids look like `tests/test_x.py::test_name` or
`tests/test_x.py::Case::test_name`. When MODE is set in the environment the
short-circuit runtime is installed and told about test boundaries.
"""

import argparse
import fnmatch
import importlib.util
import inspect
import os
import signal
import sys
import time
import traceback
import unittest
from xml.sax.saxutils import escape, quoteattr

SKIP_DIRS = {"__pycache__", "site-packages"}


class TestTimeout(BaseException):
    pass


def _alarm(signum, frame):
    raise TestTimeout("test exceeded its time budget")


def discover_files(root, patterns):
    found = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if not d.startswith(".") and d not in SKIP_DIRS)
        for name in sorted(filenames):
            if any(fnmatch.fnmatch(name, p) for p in patterns):
                rel = os.path.relpath(os.path.join(dirpath, name), root)
                found.append(rel.replace(os.sep, "/"))
    return sorted(found)


def load_module(root, rel):
    name = "_sc_tests." + rel[:-3].replace("/", ".")
    spec = importlib.util.spec_from_file_location(name, os.path.join(root, rel))
    module = importlib.util.module_from_spec(spec)
    sys.modules[name] = module
    spec.loader.exec_module(module)
    return module


def collect(rel, module):
    tests = []
    members = []
    for attr, obj in vars(module).items():
        if getattr(obj, "__module__", None) != module.__name__:
            continue
        if inspect.isfunction(obj) and attr.startswith("test"):
            members.append((obj.__code__.co_firstlineno, attr, obj, None))
        elif inspect.isclass(obj) and issubclass(obj, unittest.TestCase):
            line = inspect.getsourcelines(obj)[1] if hasattr(obj, "__qualname__") else 0
            members.append((line, attr, obj, unittest.TestLoader().getTestCaseNames(obj)))
    for _, attr, obj, methods in sorted(members, key=lambda m: (m[0], m[1])):
        if methods is None:
            tests.append(("%s::%s" % (rel, attr), obj, None))
        else:
            for m in methods:
                tests.append(("%s::%s::%s" % (rel, attr, m), obj, m))
    return tests


def run_callable(fn):
    try:
        fn()
    except unittest.SkipTest as e:
        return "skip", str(e)
    except AssertionError:
        return "fail", traceback.format_exc()
    except TestTimeout:
        return "error", "timeout"
    except BaseException:
        return "error", traceback.format_exc()
    return "pass", ""


def run_case(cls, method):
    result = unittest.TestResult()
    cls(method).run(result)
    if result.errors:
        text = result.errors[0][1]
        return "error", "timeout" if "TestTimeout" in text else text
    if result.failures:
        return "fail", result.failures[0][1]
    if result.skipped:
        return "skip", result.skipped[0][1]
    if result.unexpectedSuccesses:
        return "fail", "unexpected success"
    return "pass", ""


def write_junit(path, results):
    counts = {"fail": 0, "error": 0, "skip": 0}
    cases = []
    for test_id, outcome, message, elapsed in results:
        parts = test_id.split("::")
        classname, name = "::".join(parts[:-1]), parts[-1]
        head = "<testcase classname=%s name=%s time=\"%.6f\"" % (
            quoteattr(classname), quoteattr(name), elapsed)
        if outcome == "pass":
            cases.append(head + "/>")
            continue
        counts[outcome] += 1
        tag = {"fail": "failure", "error": "error", "skip": "skipped"}[outcome]
        first = message.strip().splitlines()[-1] if message.strip() else outcome
        cases.append("%s><%s message=%s>%s</%s></testcase>" % (
            head, tag, quoteattr(first), escape(message), tag))
    doc = ['<?xml version="1.0" encoding="utf-8"?>',
           '<testsuites><testsuite name="shortcircuit" tests="%d" failures="%d" errors="%d" skipped="%d">'
           % (len(results), counts["fail"], counts["error"], counts["skip"])]
    doc.extend(cases)
    doc.append("</testsuite></testsuites>")
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(doc) + "\n")
    os.replace(tmp, path)


def main(argv=None):
    parser = argparse.ArgumentParser()
    parser.add_argument("--junit", required=True)
    parser.add_argument("--timeout", type=float, default=0.0)
    parser.add_argument("--root", default=".")
    parser.add_argument("--pattern", action="append", default=None)
    parser.add_argument("tests", nargs="*")
    args = parser.parse_args(argv)

    root = os.path.abspath(args.root)
    sys.path.insert(0, root)
    os.chdir(root)

    rt = None
    if os.environ.get("MODE"):
        import shortcircuit_rt as rt
        try:
            rt.install()
        except OSError as e:
            sys.stderr.write("shortcircuit: cannot open trace: %s\n" % e)
            return 3

    patterns = args.pattern or ["test_*.py", "*_test.py"]
    wanted = list(args.tests)
    if wanted:
        files = sorted({t.split("::")[0] for t in wanted})
    else:
        files = discover_files(root, patterns)

    results = []
    available = {}
    order = []
    for rel in files:
        try:
            module = load_module(root, rel)
        except BaseException:
            message = traceback.format_exc()
            if wanted:
                for t in wanted:
                    if t.split("::")[0] == rel:
                        results.append((t, "error", message, 0.0))
            else:
                results.append(("%s::<collection>" % rel, "error", message, 0.0))
            continue
        for test_id, obj, method in collect(rel, module):
            available[test_id] = (obj, method)
            order.append(test_id)

    targets = wanted if wanted else order
    done = {r[0] for r in results}
    write_junit(args.junit, results)
    use_alarm = args.timeout > 0 and hasattr(signal, "setitimer")
    if use_alarm:
        signal.signal(signal.SIGALRM, _alarm)

    for test_id in targets:
        if test_id in done:
            continue
        if test_id not in available:
            results.append((test_id, "error", "test not found", 0.0))
            write_junit(args.junit, results)
            continue
        obj, method = available[test_id]
        if rt is not None:
            rt.begin_test(test_id)
        start = time.monotonic()
        if use_alarm:
            signal.setitimer(signal.ITIMER_REAL, args.timeout)
        try:
            if method is None:
                outcome, message = run_callable(obj)
            else:
                outcome, message = run_case(obj, method)
        except TestTimeout:
            outcome, message = "error", "timeout"
        finally:
            if use_alarm:
                signal.setitimer(signal.ITIMER_REAL, 0)
        elapsed = time.monotonic() - start
        if rt is not None:
            rt.end_test(test_id, outcome)
        results.append((test_id, outcome, message, elapsed))
        write_junit(args.junit, results)

    failed = any(r[1] in ("fail", "error") for r in results)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
