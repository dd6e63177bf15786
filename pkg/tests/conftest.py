from pathlib import Path

import pytest

from graphtalk.ministore.graph import load_triples
from graphtalk.schema import SchemaRegistry

ROOT = Path(__file__).resolve().parent.parent
FIX = ROOT / "fixtures"


@pytest.fixture(scope="session")
def fix() -> Path:
    return FIX


@pytest.fixture(scope="session")
def reg() -> SchemaRegistry:
    return SchemaRegistry.load(FIX / "schema" / "schema.json", FIX / "schema" / "super_properties.json")


@pytest.fixture(scope="session")
def world():
    return load_triples(FIX / "graph" / "world.jsonl")


@pytest.fixture(scope="session")
def people():
    return load_triples(FIX / "graph" / "people.jsonl")


ACCEPTANCE: list[str] = []


def record(n: int, ok: bool, detail: str) -> None:
    line = f"AC{n:>2} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda l: int(l[2:4])):
            terminalreporter.write_line(line)
