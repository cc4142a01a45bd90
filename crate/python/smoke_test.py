"""Smoke test for the mipslab extension module."""

import json
import math

import mipslab


def main():
    assert "default" in mipslab.presets()
    tau = mipslab.true_ate("default")
    assert 0.0 < tau < 1.0

    data = mipslab.generate("default", 200, 1)
    assert len(data["z"]) == 200
    for x, r in zip(data["x"], data["r"]):
        assert (x is None) == (r == 0)

    reports = {r["method"]: r for r in mipslab.plim("default")}
    assert abs(reports["apw"]["bias"]) < 1e-10
    assert abs(reports["aps"]["bias"]) > 1e-3

    appendix = mipslab.check_appendix("default")
    assert appendix["a"]["max_blue_gap"] < 1e-12
    assert appendix["b"]["max_joint_gap"] < 1e-12

    stack = mipslab.impute("default", 100, 4, 2, imputer="fitted")
    assert stack["m"] == 4 and len(stack["x_imputed"]) == 4
    scores = mipslab.impute("default", 500, 2, 2, imputer="propensity")
    assert scores["x_imputed"] is None and len(scores["u_imputed"][0]) == 500

    config = {
        "world": "default",
        "sample_sizes": [2000],
        "replications": 5,
        "m": 5,
        "seed": 11,
        "methods": [{"method": "within", "base": "hajek"}, {"method": "apw", "base": "ht"}],
    }
    out = mipslab.run_experiment(json.dumps(config))
    assert len(out["results"]) == 10
    assert all(math.isfinite(s["mean"]) for s in out["summary"])

    try:
        mipslab.run_experiment(json.dumps({**config, "replications": 0}))
    except ValueError:
        pass
    else:
        raise AssertionError("invalid configuration accepted")

    print(f"mipslab smoke test passed (ATE {tau:.6f})")


if __name__ == "__main__":
    main()
