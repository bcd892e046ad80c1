"""Smoke test for the optomech Python extension.

Build and install first, e.g. `pip install ./crates/python`, then run
`python python/smoke_test.py`.
"""

import json
import math
import tempfile
from pathlib import Path

import optomech_py as om


def main():
    names = om.recipes()
    assert "fig2" in names and len(names) == 13, names

    params = om.Params.entanglement()
    assert params.to_dict()["kappa"] == 2.0

    drive = om.Drive(2.0, {0: 15e4, 1: 3e4, -1: 3e4})
    assert abs(drive.value(0.0) - 21e4) < 1e-6

    engineered = om.Drive.engineered(om.Params.engineering(), 1.2, 0.1, 2.0)
    assert sorted(engineered.components) == [-1, 0, 1, 2]

    exp = om.Experiment.recipe("fig2")
    dev = exp.compare_sources()
    assert dev["a"] < 0.01 and dev["c"] < 0.01, dev

    hot = exp.with_scalar("n_th", 50.0)
    assert hot.params.to_dict()["n_th"] == 50.0

    cfg = json.loads(om.Experiment.recipe("fig5a").variant("floquet").to_json())
    cfg.update(horizon_periods=4, window={"from": 3, "to": 4}, samples_per_period=16)
    data = om.Experiment.from_json(json.dumps(cfg)).simulate()
    assert len(data["EN"]) == len(data["t"]) > 0
    assert all(en > 0 for en in data["EN"]), data["EN"][:3]
    en = om.log_negativity(data["cm"][-1])
    assert math.isclose(en, data["EN"][-1])
    assert math.isclose(om.phonon_number(data["cm"][-1]), data["neff"][-1])

    a = om.drift_matrix(params, 10.0, 1e3 + 2e3j)
    assert a[0][1] == params.to_dict()["omega_m"]

    try:
        om.Experiment.from_json('{"params": {"kappa": -1}}')
    except ValueError:
        pass
    else:
        raise AssertionError("invalid config accepted")

    with tempfile.TemporaryDirectory() as tmp:
        manifest = om.Experiment.recipe("fig6").run(tmp)
        assert "coupling.csv" in manifest
        assert (Path(tmp) / "coupling.csv").exists()

    print("optomech_py", om.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
