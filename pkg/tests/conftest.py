import json
from importlib.resources import files
from pathlib import Path

import pytest

from gridstep import analyze, build_reduced_model, load_grid

DATA = Path(str(files("gridstep") / "data"))


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


def _model(name):
    return build_reduced_model(load_grid(DATA / name))


@pytest.fixture(scope="session")
def smib_model():
    return _model("smib.json")


@pytest.fixture(scope="session")
def smib_cc_model():
    return _model("smib_cc.json")


@pytest.fixture(scope="session")
def wscc9_model():
    return _model("wscc9.json")


@pytest.fixture(scope="session")
def ieee39_model():
    return _model("ieee39.json")


@pytest.fixture(scope="session")
def smib_basis(smib_model):
    return analyze(smib_model)


@pytest.fixture(scope="session")
def smib_cc_basis(smib_cc_model):
    return analyze(smib_cc_model)


@pytest.fixture(scope="session")
def wscc9_basis(wscc9_model):
    return analyze(wscc9_model)


@pytest.fixture(scope="session")
def ieee39_basis(ieee39_model):
    return analyze(ieee39_model)


@pytest.fixture(scope="session")
def dfec_scenario():
    from gridstep.scenario import load_scenario

    return load_scenario(DATA / "dfec_twomachine.json")


def write_json(path, doc):
    path = Path(path)
    path.write_text(json.dumps(doc, indent=1))
    return path
