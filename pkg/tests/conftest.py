import json
import pathlib

import pytest

DATA = pathlib.Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def model_artifact_path() -> str:
    return str(DATA / "model.json")


@pytest.fixture(scope="session")
def golden(request):
    def load(name: str) -> dict:
        return json.loads((DATA / name).read_text())

    return load
