"""Smoke test for the kinetic_stils_py extension module.

Build and install first, e.g.

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/kinetic_stils_py-*.whl
"""

import math

import kinetic_stils_py as ks


def main():
    e = ks.Expr("-2^2 + max(x, t)")
    assert e.eval(t=1.0, x=3.0) == 7.0
    assert sorted(e.free_vars()) == ["t", "x"]
    try:
        ks.Expr("sin(")
    except ValueError:
        pass
    else:
        raise AssertionError("parse error expected")

    grid = ks.Grid(1.0, 4, [4])
    assert grid.node_count == 25
    g = ks.lift("x", "t", [1.0], grid)
    for value, (t, x) in zip(g, grid.nodes()):
        assert abs(value - abs(x - t)) <= 1e-12
    kind, hit_t, hit_x = ks.backtrack(0.5, [0.2], [1.0])
    assert kind == "boundary" and abs(hit_t - 0.3) < 1e-15 and hit_x == [0.0]

    sol = ks.solve_transport("sin(pi*x) + pi*t*cos(pi*x)", "0", "0", [1.0], ks.Grid(1.0, 8, [8]))
    assert sol["pass"] and sol["ratio"] <= 2.0

    c = ks.discrete_constant(ks.Grid(1.0, 64, [64]), [0.0])
    assert c["pass"] and abs(c["c_h"] - 2 / math.pi) < 0.01

    zero, gyro = ["0", "0", "0"], ["0", "0", "1"]
    assert ks.field_a(0.0, [0, 0, 0], [1, 0, 0], zero, gyro) == [1, 1, 0, 0, 0, -1, 0]
    assert abs(ks.divergence_a(0.3, [0.1, 0.2, 0], [1, 2, 3], ["t", "x", "y"], ["sin(t+x)", "cos(y)", "x*y"])) <= 1e-6
    traj = ks.flow_rk4([0, 0, 0], [1, 0, 0], zero, gyro, 2 * math.pi / 1000, 1000)
    assert len(traj) == 1001 and math.hypot(*traj[-1][1:4]) <= 1e-6

    bump = lambda v: f"{v}^2*(1-{v})^2"
    f = "t*" + "*".join(bump(v) for v in ["x", "vx", "vy", "vz"])
    r = ks.vlasov_ratio(f, [(0.0, 1.0)], [(0.0, 1.0)] * 3, zero, gyro, 1.0, quad_order=4)
    assert r["pass"] and r["ratio"] <= r["bound"]

    print("smoke test passed")


if __name__ == "__main__":
    main()
