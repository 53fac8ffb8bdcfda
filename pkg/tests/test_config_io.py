from __future__ import annotations

import math

import numpy as np
import pytest

from vortexperch import io
from vortexperch.config import ConfigError, ScenarioConfig, parse_config, serialize_config
from vortexperch.mppi import ControlSequence
from vortexperch.tvlqr import GainSchedule
from vortexperch.vehicle import QUASI_STEADY, Vehicle, VehicleState


def test_empty_document_gives_defaults():
    assert parse_config("") == ScenarioConfig()
    assert parse_config("# nothing here\n\n") == ScenarioConfig()


def test_invalid_value_names_the_key():
    with pytest.raises(ConfigError, match="rho") as info:
        parse_config("[vehicle]\nmass = 0.2\nrho = -1\n")
    assert "line 3" in str(info.value)


def test_unknown_section_and_key_carry_line_numbers():
    with pytest.raises(ConfigError, match="line 2: unknown section"):
        parse_config("\n[wingz]\nspan = 1\n")
    with pytest.raises(ConfigError, match="line 3: unknown key 'spam'"):
        parse_config("[planner]\nsamples = 8\nspam = 1\n")
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("[planner]\nsamples = many\n")


def test_morphing_quasi_steady_is_a_valid_mode():
    cfg = parse_config("[mode]\nwing = morphing\nmodel = quasi-steady\n")
    assert cfg.mode.morphing and cfg.fluid.model == QUASI_STEADY
    with pytest.raises(ConfigError):
        parse_config("[mode]\nwing = flapping\n")


def test_serialize_round_trip():
    text = ("[planner]\nsamples = 7\nsigma_sweep = 0.123\n[feedback]\nr = 2, 3\n"
            "[mode]\nwing = fixed\nmodel = quasi-steady\n[run]\nseed = 42\n")
    cfg = parse_config(text)
    assert cfg.feedback.r == (2.0, 3.0) and cfg.run.seed == 42
    assert parse_config(serialize_config(cfg)) == cfg


def test_control_file_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    seq = ControlSequence(0.05, rng.normal(size=(30, 2)) * 0.1)
    path = str(tmp_path / "plan.csv")
    io.write_controls(path, seq)
    back = io.read_controls(path)
    assert back.knot_dt == seq.knot_dt
    assert back.values.tobytes() == seq.values.tobytes()


def test_gain_file_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    g = GainSchedule(np.arange(5) * 0.05, rng.normal(size=(5, 1, 6)), np.diag(np.arange(1.0, 7.0)),
                     np.eye(1) * 2.5, np.eye(6) * math.pi, (True, False), (3,))
    path = str(tmp_path / "gains.csv")
    io.write_gains(path, g)
    back = io.read_gains(path)
    assert back.gains.tobytes() == g.gains.tobytes()
    assert back.channels == g.channels and back.floored == (3,)
    np.testing.assert_array_equal(back.Q, g.Q)
    np.testing.assert_array_equal(back.Qf, g.Qf)


def test_trajectory_file_layout(tmp_path):
    traj = Vehicle().run(VehicleState(xdot=7.0), np.zeros((5, 2)))
    path = str(tmp_path / "t.csv")
    io.write_trajectory(path, traj)
    _, header, data = io.read_table(path)
    n_slices = traj.wake_counts.shape[1]
    assert header == io.trajectory_header(n_slices)
    assert data.shape == (6, len(header))
    assert data[:, 2:11].tobytes() == traj.states.tobytes()
