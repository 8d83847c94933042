"""Smoke test for the goafem extension module.

Build first with `cargo build --release -p goafem-py`; the script copies the
shared library next to itself so that `import goafem` picks it up.
"""

import math
import pathlib
import shutil
import sys

HERE = pathlib.Path(__file__).resolve().parent
ROOT = HERE.parent


def install_extension():
    for name in ("libgoafem.so", "libgoafem.dylib"):
        lib = ROOT / "target" / "release" / name
        if lib.exists():
            shutil.copy(lib, HERE / "goafem.so")
            return
    sys.exit("extension not built: run `cargo build --release -p goafem-py`")


def main():
    install_extension()
    sys.path.insert(0, str(HERE))
    import goafem

    mesh = goafem.Mesh.benchmark("square-goal")
    assert (mesh.num_elements, mesh.num_vertices) == (16, 13)
    fine = mesh.refine([0, 3])
    assert fine.is_conforming() and fine.num_elements > mesh.num_elements
    assert math.isclose(sum(fine.areas()), sum(mesh.areas()), rel_tol=1e-12)

    assert goafem.doerfler_min_set([0.1, 0.5, 0.2, 0.2], 0.6) == [1, 2]
    marked = goafem.mark([1.0, 0.0, 2.0], [0.5, 0.5, 0.5], strategy="b", vartheta=0.5)
    assert marked, marked

    history = goafem.run("zshape", max_elements=5000)
    cols = history.columns()
    assert len(cols["xi"]) == len(history)
    assert all(b >= a for a, b in zip(cols["work"], cols["work"][1:]))
    slope = history.rate("work", "goal-error")
    print(f"zshape: {len(history)} steps, {history.num_levels} levels, "
          f"termination={history.termination}, goal error slope vs work {slope:.3f}")

    try:
        goafem.run("square-goal", vartheta=2.0)
    except ValueError as err:
        print(f"rejected invalid parameter: {err}")
    else:
        raise AssertionError("invalid vartheta accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
