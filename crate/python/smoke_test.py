"""Smoke test for the fdwp_py extension module.

Build and install the module first:

    pip install --no-build-isolation -e crates/py

then run ``python python/smoke_test.py``.
"""

import math

import fdwp_py


def main():
    # Scalar closed forms.
    w = fdwp_py.lambert_w0(1.0)
    assert abs(w * math.exp(w) - 1.0) < 1e-12
    wm = fdwp_py.lambert_wm1(-0.1)
    assert wm <= -1.0 and abs(wm * math.exp(wm) + 0.1) < 1e-12
    assert fdwp_py.exp_scaled_e1(2.0) < fdwp_py.exp_scaled_e1(1.0)
    cdf = fdwp_py.hypoexp_cdf([1.0, 2.0], 1.0)
    assert abs(cdf - (1.0 + math.exp(-1.0) - 2.0 * math.exp(-0.5))) < 1e-12

    alpha_peak, r_max = fdwp_py.rb_max(50.0)
    alpha = fdwp_py.zf_alpha_opt(0.5 * r_max, 50.0, 1.0)
    assert 0.0 < alpha < alpha_peak
    assert fdwp_py.zf_alpha_opt(1.01 * r_max, 50.0, 1.0) is None

    try:
        fdwp_py.lambert_w0(-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("domain error not raised")

    # A tiny scenario through every driver.
    sc = fdwp_py.Scenario(
        '{"n_tx": 2, "power_dbm": 10, "rb_grid_points": 4, "realizations": 2,'
        ' "rho_grid": [0.2, 1.0], "mc_samples": 4000, "seed": 3}'
    )
    print(sc)
    region = sc.rate_region()
    assert len(region) == 4 * 4
    assert {row["method"] for row in region} == {"optimum", "zf", "hd_ac", "hd_rfc"}

    rows = sc.partial_csi()
    assert [r["rho"] for r in rows] == [0.2, 1.0]
    assert rows[1]["ergodic_rate_bpcu"] >= rows[0]["ergodic_rate_bpcu"]

    checks = sc.validate()
    assert len(checks) == 12 and all(passed for *_, passed in checks)

    try:
        fdwp_py.Scenario('{"n_tx": 9}')
    except ValueError as err:
        assert "n_tx" in str(err)
    else:
        raise AssertionError("bad scenario accepted")

    print("fdwp_py smoke test passed")


if __name__ == "__main__":
    main()
