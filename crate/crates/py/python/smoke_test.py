import math

import qbound


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


obj = qbound.Object.gaussian(0.01)
otf = qbound.Otf.gaussian(1.0)
pipe = qbound.Pipeline(obj, otf, q_max=16)

r = pipe.k_tilde(1)
print("k_tilde_11", r["value"], r["verdict"])
assert r["verdict"] == "converged"
assert close(r["value"], 4.0, 1e-2)
assert close(pipe.leading_order(1), 4.0, 1e-2)

m = pipe.k_tilde_matrix([1, 2])
assert len(m) == 2 and close(m[0][1], m[1][0], 1e-12)

chk = qbound.derivative_check(obj, 8, 2)
print("derivative_check", chk)
assert chk["forms"] < 1e-30 and chk["finite_difference"] < 1e-20

t = 0.3
k = qbound.thermal_qfi([[t]], [[[1.0]]])
assert close(k[0][0], 1.0 / (t * (1.0 + t)), 1e-12)
assert close(qbound.sld_qfi([[t]], [[[1.0]]])[0][0], 1.0 / (t * t), 1e-12)
assert close(qbound.infrared_fisher([[t]], [[[1.0]]])[0][0], 1.0 / (t * t), 1e-12)

eps = [0.01, 1.0, 100.0]
for e, kappa in zip(eps, qbound.kappa_curve([[t]], [[[1.0]]], eps)):
    assert close(kappa[0][0], 1.0 / (t * t * (1.0 + e)), 1e-12)

suite = qbound.thermal_suite(seed=3, models=10)
print("thermal_suite", suite)
assert all(passed for passed, _ in suite.values())

try:
    qbound.Object.gaussian(0.0)
except qbound.QboundError:
    pass
else:
    raise AssertionError("zero delta accepted")

assert math.isfinite(pipe.w)
print("smoke test passed")
