from pathlib import Path

import pytest

from sccphybrid.lang import load_program
from sccphybrid.rts import prepare

MODELS = Path(__file__).resolve().parent.parent / "models"


def model_path(name: str) -> Path:
    return MODELS / f"{name}.sccp"


def extended(name: str):
    return prepare(load_program(model_path(name)))


@pytest.fixture
def gene():
    return extended("gene")


@pytest.fixture
def birth_death():
    return extended("birth_death")
