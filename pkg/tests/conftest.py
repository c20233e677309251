import numpy as np
import pytest

from selective_depth import pipeline, synth


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def two_plane():
    """320x240 slab-over-ground scene, its five views and the reference ground truth."""
    scene = synth.two_plane_scene(320, 240)
    views = synth.views(scene)
    _, gt = synth.render(scene, 2)
    return scene, pipeline.select_bundle(views, 2), gt


@pytest.fixture(scope="session")
def small_scene():
    scene = synth.two_plane_scene(96, 72)
    views = synth.views(scene)
    _, gt = synth.render(scene, 2)
    return scene, pipeline.select_bundle(views, 2), gt


_acceptance = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion of the build")


def pytest_runtest_logreport(report):
    marker = dict(report.user_properties).get("acceptance")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(report.user_properties).get("detail", "")
        _acceptance[marker] = (report.outcome, detail)


def pytest_runtest_setup(item):
    m = item.get_closest_marker("acceptance")
    if m is not None:
        item.user_properties.append(("acceptance", (m.args[0], m.args[1])))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), (outcome, detail) in sorted(_acceptance.items()):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{verdict}] {number:>2}. {title}" + (f" -- {detail}" if detail else ""))
