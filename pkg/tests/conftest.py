"""
Pytest configuration and shared fixtures for Sparse Market Lab.

Provides environment isolation, hand-built markets with known stable sets,
seeded generators and small school-choice fixtures for service, repository,
CLI and API tests.
"""

from __future__ import annotations

from collections.abc import AsyncIterator
from pathlib import Path

import numpy as np
import pytest
from httpx import ASGITransport, AsyncClient

from app.models.market import Market
from app.models.school import Program, Programs, Roster, Student
from app.services.market_gen import market_from_lists

# ---------------------------------------------------------------------------
# Environment setup
# ---------------------------------------------------------------------------


@pytest.fixture(autouse=True)
def set_test_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    """Ensure tests run with deterministic, single-process settings."""
    monkeypatch.setenv("ENVIRONMENT", "development")
    monkeypatch.setenv("LOG_LEVEL", "WARNING")
    monkeypatch.setenv("WORKERS", "1")
    monkeypatch.delenv("OUTPUT_FORMAT", raising=False)
    monkeypatch.delenv("TRACE_DECIMATION", raising=False)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


# ---------------------------------------------------------------------------
# Hand-built markets
# ---------------------------------------------------------------------------


@pytest.fixture
def first_choice_market() -> Market:
    """Every man's first choice ranks him first: one stable matching {0-0, 1-1}."""
    return market_from_lists([[0, 1], [1, 0]], [[0, 1], [1, 0]])


@pytest.fixture
def cyclic_market() -> Market:
    """Men prefer [0, 1] and [1, 0]; women prefer the other man first.

    Man-optimal {0-0, 1-1}, woman-optimal {0-1, 1-0}.
    """
    return market_from_lists([[0, 1], [1, 0]], [[1, 0], [0, 1]])


@pytest.fixture
def two_men_one_woman() -> Market:
    """Both men list the single woman, who prefers man 1."""
    return market_from_lists([[0], [0]], [[1, 0]])


# ---------------------------------------------------------------------------
# School-choice fixtures
# ---------------------------------------------------------------------------


@pytest.fixture
def small_programs() -> Programs:
    return Programs(
        programs=[
            Program(id="alpha", capacity=1),
            Program(id="beta", capacity=2),
            Program(id="gamma", capacity=1),
        ]
    )


@pytest.fixture
def small_roster() -> Roster:
    return Roster(
        students=[
            Student(id="s1", preferences=("alpha", "beta")),
            Student(id="s2", preferences=("alpha", "gamma", "beta")),
            Student(id="s3", preferences=("beta",), priority_classes={"beta": 1}),
            Student(id="s4", preferences=("alpha", "beta", "gamma")),
            Student(id="s5", preferences=("gamma",)),
        ]
    )


@pytest.fixture
def roster_files(tmp_path: Path) -> tuple[Path, Path]:
    """A three-student roster CSV and its programs CSV."""
    roster = tmp_path / "roster.csv"
    roster.write_text(
        "student_id,rank,program_id,priority_class\n"
        "s1,1,alpha,\n"
        "s1,2,beta,\n"
        "s2,1,beta,1\n"
        "s3,2,alpha,\n"
        "s3,1,gamma,\n",
        encoding="utf-8",
    )
    programs = tmp_path / "programs.csv"
    programs.write_text("program_id,capacity\nalpha,1\nbeta,1\ngamma,2\n", encoding="utf-8")
    return roster, programs


# ---------------------------------------------------------------------------
# API client
# ---------------------------------------------------------------------------


@pytest.fixture
async def client() -> AsyncIterator[AsyncClient]:
    from app.main import create_app

    transport = ASGITransport(app=create_app())
    async with AsyncClient(transport=transport, base_url="http://test") as http:
        yield http
