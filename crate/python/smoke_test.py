"""Smoke test for the pydiffpm extension module.

Build and install first, e.g. `pip install --no-build-isolation ./crates/python`
or `maturin develop -m crates/python/Cargo.toml`, then run this script.
"""

import math
import random

import pydiffpm


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    h = pydiffpm.Atf.freefield(1000.0)
    assert h.shape == (32, 9) and h.n_bright == 16, h

    # Single-node DPM-D is CPM.
    rng = random.Random(0)
    g_o = [complex(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(9)]
    d = h.pressure(g_o)
    mu = 0.5 * h.stability_bound()
    g_cpm = pydiffpm.cpm(h, d, mu, 200)
    g_net, nodes, dis = pydiffpm.Network.single_node(32, 9).run(h, d, mu, 200)
    assert all(abs(a - b) <= 1e-12 * abs(a) for a, b in zip(g_cpm, g_net))
    assert len(nodes) == 1 and dis == 0.0

    # Least squares recovers the filter behind a consistent target.
    g_ls = h.least_squares(d)
    assert max(abs(a - b) for a, b in zip(g_ls, g_o)) < 1e-6

    # Metrics.
    assert pydiffpm.nmse_db(d, d) == -300.0
    assert pydiffpm.nmse_db(d, [0j] * 32) == 0.0
    assert close(h.contrast_db(g_o), h.contrast_db([3j * z for z in g_o]), 1e-12)

    # Complexity model.
    cpm = pydiffpm.complexity_cpm(32, 9, 3200)
    assert close(cpm["additions"], 41 * 3200 * math.log2(3200) + 288, 1e-12)
    node = pydiffpm.complexity_dpmd(4, 1, 4, 3, 9, 3200)
    assert node["processing_additions"] == 54 and node["processing_multiplications"] == 72

    # Networks.
    s1, s2 = pydiffpm.Network.system1(), pydiffpm.Network.system2("metropolis")
    assert (s1.n_nodes, s2.n_nodes) == (9, 4)
    assert s1.neighborhood(0) == [0, 1, 8]

    # A small Monte Carlo experiment.
    res = pydiffpm.run_monte_carlo('step_size = "auto"\niterations = 200\nmonte_carlo_runs = 2\n')
    names = [row[1] for row in res["steady_state"]]
    assert names == ["cpm", "dpmd-system1", "dpmd-system2"], names
    assert ("cpm", "validation") in res["learning_curves"]
    assert len(res["config_hash"]) == 64

    try:
        pydiffpm.run_monte_carlo("iterations = 0")
    except ValueError as e:
        assert "iterations" in str(e)
    else:
        raise AssertionError("invalid config accepted")

    print("pydiffpm", pydiffpm.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
