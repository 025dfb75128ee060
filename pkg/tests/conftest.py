import numpy as np
import pytest
from PIL import Image

FIXTURE_CLASSES = ("COVID", "Normal", "Viral Pneumonia")


def write_fixture_images(root, per_class=4, size=224, seed=1234):
    """12 synthetic X-ray-like images (3 classes x 4); one RGB image per class."""
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for c, name in enumerate(FIXTURE_CLASSES):
        d = root / name
        d.mkdir(exist_ok=True)
        for i in range(per_class):
            if i == 0:
                px = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
                img = Image.fromarray(px, mode="RGB")
            else:
                px = rng.integers(0, 256, size=(size, size), dtype=np.uint8)
                img = Image.fromarray(px, mode="L")
            img.save(d / f"{name.lower().replace(' ', '_')}_{i:03d}.png")
    return root


@pytest.fixture
def image_root(tmp_path):
    return write_fixture_images(tmp_path / "radiography")


# acceptance summary -------------------------------------------------------------

_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if report.skipped:
            status = "SKIP"
        else:
            status = "PASS" if report.passed else "FAIL"
        previous = _criteria.get(number, (title, "PASS"))[1]
        if previous == "FAIL":
            status = "FAIL"
        _criteria[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")
