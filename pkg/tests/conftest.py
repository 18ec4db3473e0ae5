from pathlib import Path

import numpy as np
import pytest

from hiertax.taxonomy import ClassHierarchy, build_hierarchy

TAX_DIR = str(Path(__file__).resolve().parent.parent / "src" / "hiertax" / "data")


@pytest.fixture
def tiny() -> ClassHierarchy:
    """root -> {A, B}, A -> {a1, a2}; ids: root=0 A=1 B=2 a1=3 a2=4."""
    return build_hierarchy(["root", "A", "B", "a1", "a2"], [-1, 0, 0, 1, 1])


@pytest.fixture
def three_level() -> ClassHierarchy:
    """Balanced 3-level tree: root -> 4 groups -> 8 leaves."""
    names = ["all", "g1", "g2", "g3", "g4"] + [f"leaf{i}" for i in range(8)]
    parent = [-1, 0, 0, 0, 0, 1, 1, 2, 2, 3, 3, 4, 4]
    return build_hierarchy(names, parent)


def random_scores(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(0.0, 1.0, size=n)
