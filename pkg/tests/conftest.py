import json

import numpy as np
import pytest

ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    from layervec.corpus import generate

    out = tmp_path_factory.mktemp("corpus")
    generate(out)
    return out


@pytest.fixture(scope="session")
def corpus(corpus_dir):
    """``[(name, image float HxWx3, sidecar dict), ...]`` for the 20 scenes."""
    from PIL import Image

    scenes = []
    for png in sorted(corpus_dir.glob("*.png")):
        img = np.asarray(Image.open(png).convert("RGB"), dtype=np.float64) / 255.0
        meta = json.loads(png.with_suffix(".json").read_text())
        scenes.append((png.stem, img, meta))
    return scenes


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
