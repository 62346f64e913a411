"""Smoke test for the agrf extension module.

Build and install first, e.g.

    pip install maturin
    maturin build --release -m crates/py/Cargo.toml
    pip install target/wheels/agrf-*.whl
"""

import math

import agrf


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def main():
    assert "styblinski-tang" in agrf.benchmarks()

    x2 = agrf.Objective.from_json('{"n":1,"poly":[{"c":1.0,"e":[2]}],"sin":[]}')
    d_mean, d_cov = agrf.rhs(x2, [1.0], 2.0)
    assert close(d_mean[0], -4.0) and close(d_cov[0][0], -8.0), (d_mean, d_cov)
    assert close(agrf.expected_value(x2, [2.0], 3.0), 7.0)
    assert close(agrf.expect_polynomial([(1.0, [4])], [0.0], 1.0), 3.0)

    bowl = agrf.Objective.quadratic([[1.0, 0.0], [0.0, 4.0]], [-6.0, -24.0], 45.0)
    assert bowl.is_quadratic
    limit = agrf.quadratic_limit(bowl)
    assert all(close(v, 3.0) for v in limit), limit
    m, c = agrf.analytic(agrf.Objective.quadratic([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], 0.0), [0.0, 0.0], 1.0, 1.0)
    assert close(c[0][0], 1.0 / 3.0) and c[0][1] == 0.0
    assert agrf.descent_rate(bowl, [0.0, 0.0], 1.0) < 0.0
    assert close(agrf.approx_descent_functional(x2, [0.0], 1.0), -3.0)

    st = agrf.Objective.benchmark("styblinski-tang", 2)
    traj = agrf.integrate(st, [3.0, 2.0], 30.0)
    assert traj.termination == "DetBelowEps", traj
    assert math.dist(traj.final_mean, [-2.903534, -2.903534]) < 0.25, traj
    assert len(traj) == len(traj.times) and traj.times[0] == 0.0
    assert traj.to_trace("csv").startswith("t,m_0,m_1,")

    try:
        agrf.rhs(x2, [0.0], -1.0)
    except agrf.FlowError:
        pass
    else:
        raise AssertionError("negative covariance accepted")

    print("agrf smoke test passed:", traj)


if __name__ == "__main__":
    main()
