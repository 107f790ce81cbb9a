"""Smoke test for the frogpy extension module.

Build and install first, e.g. ``maturin develop -m crates/py/Cargo.toml``.
"""

import math

import frogpy


def main():
    pi = frogpy.JumpLaw.exponential(1.0)
    mu = frogpy.InitLaw.deterministic(1)

    g = frogpy.g_bound(pi, 1.0, 2)
    assert abs(g - 0.01935227) < 1e-6, g

    sim = frogpy.Simulation(1, pi, mu, seed=3, t_max=5.0)
    summary = sim.run()
    assert summary["stop_reason"] == "t_max", summary
    assert sim.n_visited == len(sim.visited()) >= 1
    assert sim.series()[0][:2] == (0, 0.0)

    again = frogpy.Simulation(1, pi, mu, seed=3, t_max=5.0)
    again.run()
    assert again.visited() == sim.visited()

    verdict = frogpy.verify_lapidation(pi, 1.0, 2, samples=20_000, seed=1)
    assert verdict["holds"], verdict

    q = frogpy.q_infinity_lower_bound(1.0, 1)
    assert abs(q["value"] - (1 - 2 * math.exp(-1))) < 1e-12

    sched = frogpy.schedule("desk", 3)
    assert sched["a"][:3] == [1, 4, 9]
    rec = frogpy.run_construction(seed=0, n_max=2, m_max=2)
    assert rec["stages"][0]["chain"][0] == 0

    try:
        frogpy.JumpLaw.exponential(-1.0)
    except ValueError as e:
        assert "rate" in str(e)
    else:
        raise AssertionError("negative rate accepted")

    print("frogpy smoke test ok")


if __name__ == "__main__":
    main()
