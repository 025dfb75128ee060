import xml.etree.ElementTree as ET

import numpy as np
import pytest

from deepfeat.evaluation import ConfusionMatrix
from deepfeat.figures import confusion_svg, render_confusion_svg

NS = "{http://www.w3.org/2000/svg}"


def classes_of(root, cls):
    return [e for e in root.iter() if e.get("class") == cls]


def test_two_by_two_structure():
    root = ET.fromstring(confusion_svg(ConfusionMatrix(np.array([[5, 0], [0, 5]]), ("a", "b"))).split("\n", 1)[1])
    texts = classes_of(root, "cell-text")
    assert len(texts) == 4
    assert [t.text for t in texts] == ["5", "0", "0", "5"]


def test_three_by_three_labels(tmp_path):
    cm = ConfusionMatrix(np.array([[268, 0, 0], [1, 238, 1], [0, 2, 267]]),
                         ("COVID", "Normal", "Viral Pneumonia"))
    render_confusion_svg(cm, tmp_path / "cm.svg", title="three classes")
    root = ET.parse(tmp_path / "cm.svg").getroot()
    assert root.tag == NS + "svg"
    assert len(classes_of(root, "cell")) == 9
    assert [e.text for e in classes_of(root, "row-label")] == list(cm.class_names)
    assert [e.text for e in classes_of(root, "col-label")] == list(cm.class_names)


def test_deterministic_bytes(tmp_path):
    cm = ConfusionMatrix(np.array([[3, 1], [2, 4]]), ("x<y", "z&w"))
    render_confusion_svg(cm, tmp_path / "a.svg")
    render_confusion_svg(ConfusionMatrix(cm.counts.copy(), cm.class_names), tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
    ET.parse(tmp_path / "a.svg")  # escaped labels stay well-formed


def test_unwritable_path(tmp_path):
    cm = ConfusionMatrix(np.eye(2, dtype=int), ("a", "b"))
    with pytest.raises(OSError):
        render_confusion_svg(cm, tmp_path / "missing" / "cm.svg")
