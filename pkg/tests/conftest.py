import time

import numpy as np
import pytest

from tangent_tomography import Ball, Ellipsoid, PolynomialFamily, SphericalPolynomial

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion number n")


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "teardown":
        if props["criterion"] in _CRITERIA and "runtime" in props:
            ok, text, _, detail = _CRITERIA[props["criterion"]]
            _CRITERIA[props["criterion"]] = (ok, text, props["runtime"], detail)
        return
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    _CRITERIA[props["criterion"]] = (report.outcome == "passed", props.get("text", ""),
                                     props.get("runtime"), props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, text, runtime, detail = _CRITERIA[n]
        rt = "" if runtime is None else f" [{runtime:.1f}s]"
        extra = f" ({detail})" if detail else ""
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {text}{rt}{extra}")


@pytest.fixture
def criterion(request, record_property):
    """Record number/description/runtime of an acceptance criterion; returns a detail setter."""
    marker = request.node.get_closest_marker("criterion")
    n, text = marker.args
    record_property("criterion", n)
    record_property("text", text)
    start = time.perf_counter()
    details = {}

    def note(**kw):
        details.update(kw)
        record_property("detail", ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
                                            for k, v in details.items()))

    note.elapsed = lambda: time.perf_counter() - start
    yield note
    record_property("runtime", time.perf_counter() - start)


@pytest.fixture
def ball2():
    return Ball(dim=2)


@pytest.fixture
def ball3():
    return Ball(dim=3)


@pytest.fixture
def ellipsoid3():
    return Ellipsoid(semiaxes=(1.0, 1.2, 1.5))


@pytest.fixture
def quad_h():
    """h(u) = 0.3 + 0.1 u_1^2"""
    return SphericalPolynomial(0.3, ((0.1, (2, 0, 0)),))


def constant_family(body, c):
    return PolynomialFamily(body, SphericalPolynomial(c))


def normal_displacement_speed(family, frame, h=1e-4):
    """Oracle for c(x): outward displacement of bd K^t along the normal line, one-sided FD."""
    x, nu = frame.point, frame.normal

    def disp(t):
        lo, hi = 0.0, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if family.gauge(x + mid * nu, t) <= 1.0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    return (-3 * 0.0 + 4 * disp(h) - disp(2 * h)) / (2 * h)
