"""Write the seeded benchmark query files under benchmarks/."""

from pathlib import Path

import numpy as np

from jacguard.elements import CLASSES
from jacguard.formats import write_query_file
from jacguard.generate import random_trajectory_element
from jacguard.jacobian import ElementSpec

OUT = Path(__file__).resolve().parent.parent / "benchmarks"


def main():
    OUT.mkdir(exist_ok=True)
    rng = np.random.default_rng(20240607)
    tri = CLASSES["triangle"]
    mesh = [random_trajectory_element(tri, 2, rng, ident=f"t{i:03d}") for i in range(300)]
    write_query_file(OUT / "tri2_mesh.query", mesh)
    collapse = ElementSpec(tri, 1, np.array([[0.0, 0], [5, 1], [2, 3]]),
                       np.array([[0.0, 0], [0, -4], [2, -7]]), "collapse")
    write_query_file(OUT / "collapse.query", [collapse])


if __name__ == "__main__":
    main()
