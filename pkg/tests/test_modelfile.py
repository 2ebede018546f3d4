"""Model file loader and writer."""

from pathlib import Path

import numpy as np
import pytest

from reachverify import BUILTINS, ModelFileError, builtin_problem, dumps, load_problem, loads
from reachverify.model import InputSignal, InputSignalAutomaton

MODELS = Path(__file__).resolve().parent.parent / "models"

CARDIAC = """
# comment line
[dimensions]
state = x1, x2
input = u

[mode main]
d/dt x1 = -x1*(x1^2 + 0.9*x1 + 0.9) + 2*x2*u + 1
d/dt x2 = x1 - 2*x2

[input]
builtin = sig
u0 = 0.1
t_fall = 5

[initial]
center = 0.5, 0.24
radius = 0.1

[unsafe]
x1 >= 2

[horizon]
10
"""


def _signal(pb, T):
    if isinstance(pb.input, InputSignalAutomaton):
        return pb.input.signal(T)
    return pb.input


def _same_dynamics(a, b, rng, points=50):
    assert a.plant.mode_names == b.plant.mode_names
    assert a.plant.state_names == b.plant.state_names
    assert a.theta.lo.tolist() == pytest.approx(b.theta.lo.tolist(), abs=1e-15)
    assert a.theta.hi.tolist() == pytest.approx(b.theta.hi.tolist(), abs=1e-15)
    assert a.T == b.T and a.eps0 == b.eps0 and a.tau0 == b.tau0
    for ma, mb in zip(a.plant.modes, b.plant.modes):
        for _ in range(points):
            x = rng.uniform(0.0, 1.2, a.plant.n)
            u = rng.uniform(0.0, 1.2, a.plant.m)
            np.testing.assert_allclose(ma.f(x, u), mb.f(x, u), rtol=1e-13, atol=1e-15)
    if a.input is not None:
        ts = np.linspace(0, a.T, 41)
        np.testing.assert_allclose(_signal(a, a.T).sample(ts), _signal(b, b.T).sample(ts), atol=1e-9)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_builtin_round_trip(name, rng):
    pb = builtin_problem(name)
    text = dumps(pb)
    back = loads(text)
    _same_dynamics(pb, back, rng)
    assert dumps(back) == text


def test_shipped_models_load(rng):
    files = sorted(MODELS.glob("*.model"))
    assert len(files) >= 7
    for f in files:
        pb = load_problem(f)
        assert pb.T > 0 and pb.theta.dim == pb.plant.n


def test_cardiac_text():
    pb = loads(CARDIAC)
    assert pb.plant.n == 2 and pb.plant.m == 1 and len(pb.plant.modes) == 1
    center, radius = pb.meta["ball"]
    assert list(center) == [0.5, 0.24] and radius == 0.1
    assert pb.theta.lo.tolist() == pytest.approx([0.4, 0.14])
    assert pb.theta.hi.tolist() == pytest.approx([0.6, 0.34])
    # logistic pulse starts at u0 and rises
    sig = _signal(pb, 10.0)
    assert sig(0.0)[0] == pytest.approx(0.1)
    assert sig(4.0)[0] > 0.5
    # x1 = -x1^3 - 0.9 x1^2 - 0.9 x1 + 2 x2 u + 1 at (0.5, 0.24), u = 0.1
    val = pb.plant.modes[0].f(np.array([0.5, 0.24]), np.array([0.1]))
    assert val[0] == pytest.approx(-0.125 - 0.225 - 0.45 + 0.048 + 1)
    assert val[1] == pytest.approx(0.5 - 0.48)


def test_hybrid_inverter_file():
    pb = load_problem(MODELS / "inverter_hybrid.model")
    assert len(pb.plant.modes) == 7
    assert len(pb.plant.transitions) == 14


def test_unknown_identifier_reports_line():
    bad = CARDIAC.replace("d/dt x2 = x1 - 2*x2", "d/dt x2 = x1 - 2*zz")
    with pytest.raises(ModelFileError) as info:
        loads(bad)
    line = 1 + bad.splitlines().index("d/dt x2 = x1 - 2*zz")
    assert info.value.line == line
    assert f":{line}:" in str(info.value)


@pytest.mark.parametrize("edit, msg", [
    (("[horizon]\n10\n", ""), "horizon"),
    (("center = 0.5, 0.24", "center = 0.5"), "center"),
    (("radius = 0.1", "radius = -1"), "radius"),
    (("[unsafe]", "[bogus]"), "bogus"),
    (("d/dt x2 = x1 - 2*x2\n", ""), "x2"),
    (("d/dt x1", "d/dt x9"), "x9"),
])
def test_malformed_files(edit, msg):
    with pytest.raises(ModelFileError, match=msg):
        loads(CARDIAC.replace(*edit))


def test_input_override_and_explicit_signal():
    pb = loads(CARDIAC, input_override=InputSignal.constant([0.3], T=10.0))
    assert pb.input(2.0)[0] == pytest.approx(0.3)
