"""Smoke test for the rhedge extension module.

Build and install first:  pip install --no-build-isolation ./crates/python
"""

import json
import math
import pathlib

import rhedge

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main():
    a2 = rhedge.RootSystem("A2")
    assert a2.order == 6 and a2.dim == 3
    assert sum(sign for _, sign in a2.elements()) == 0

    word, y = a2.canonicalize([0.1, 0.7, -0.4])
    assert all(b > 0 for b in (y[0] - y[1], y[1] - y[2]))

    line = rhedge.RootSystem("orthogonal(1)")
    p, _ = line.survival_probability(1.0, [1.0])
    assert abs(p - math.erf(1 / math.sqrt(2))) < 1e-6
    free = lambda a, b: math.exp(-(a - b) ** 2 / 2) / math.sqrt(2 * math.pi)
    assert abs(line.killed_density(1.0, [0.4], [0.9]) - (free(0.4, 0.9) - free(0.4, -0.9))) < 1e-14

    model = rhedge.Model.load(str(ROOT / "configs" / "put_call_1d.json"))
    portfolio = model.hedge("call:k=1,K=100", 1.0)
    assert len(portfolio) == 2 and portfolio.sign_sum() == 0
    again = rhedge.Portfolio.from_json(portfolio.to_json())
    assert again.price(model, 1.0, paths=20000) == portfolio.price(model, 1.0, paths=20000)
    assert json.loads(portfolio.to_json())["version"].startswith("reflection-hedge")

    report = model.verify("call:k=1,K=100", 1.0, paths=50000)
    assert report.passed, report

    exponent, expected, martingale, _ = rhedge.put_call_symmetry(0.2, 0.02, 100.0, 90.0, 100.0, 1.0, paths=20000)
    assert abs(exponent - expected) < 1e-12 and abs(martingale - 1.0) < 1e-12

    try:
        rhedge.Model.from_json('{"r": 0.0}')
    except ValueError as e:
        assert "lambda" in str(e)
    else:
        raise AssertionError("missing lambda was accepted")

    print(f"rhedge {rhedge.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
