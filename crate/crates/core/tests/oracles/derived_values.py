"""Independent oracles for the frozen expected values used in the Rust tests.

Run with `python3 derived_values.py`; every printed value is pasted into the
corresponding test as a literal.
"""
import cmath
import math

import numpy as np

# Circular orbit: Rz(raan) . Rx(incl) . (r cos th, r sin th, 0)
def rz(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

def rx(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])

r, incl, raan, phase0, t, rate = 2.656e7, 0.9599, 1.0, 0.3, 3600.0, 1.4544e-4
th = phase0 + rate * t
p = rz(raan) @ rx(incl) @ np.array([r * math.cos(th), r * math.sin(th), 0.0])
print("orbit_position", repr(p[0]), repr(p[1]), repr(p[2]))

print("range diag", repr(math.hypot(1e7, 1e7)))

# Reflection coefficient and gain
zl, za = complex(-650, 0), complex(50, 0)
g = (zl - za.conjugate()) / (zl + za)
print("gamma", repr(g.real), "gain_lin", repr(abs(g) ** 2), "gain_db", repr(10 * math.log10(abs(g) ** 2)))
zl = complex(-51, 0)
g = (zl - za.conjugate()) / (zl + za)
print("near-match gain_db", repr(10 * math.log10(abs(g) ** 2)))

# Inductance and Q
f = 1.57542e9
L = 1.0 / ((2 * math.pi * f) ** 2 * 0.465e-12)
print("solve_inductance", repr(L))
print("Q", repr(2 * math.pi * f * 21.95e-9 / 5.0))

# Equivalent capacitance: Cp || [r + jwLp + (Cj || Rnr)]
def ceq(cj, cp, lp, rs, rnr, fc):
    w = 2 * math.pi * fc
    y_inner = 1j * w * cj + 1.0 / rnr
    z_branch = rs + 1j * w * lp + 1.0 / y_inner
    y = 1j * w * cp + 1.0 / z_branch
    return y.imag / w

print("ceq datasheet", repr(ceq(0.1e-12, 0.3e-12, 1.2e-9, 6.0, -650.0, f)))

# Noise figure
nf = (1 + 1.2) / ((1 - 6.0 / -650.0) * (1 - 0.1))
print("nf", repr(nf), "nf_db", repr(10 * math.log10(nf)))

# Ambiguity
print("ambiguity", repr((1019.03 - 1000.0) / 0.19029367))

# Tetrahedral DOP: G rows [-u, 1]
u = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / math.sqrt(3)
G = np.hstack([-u, np.ones((4, 1))])
Q = np.linalg.inv(G.T @ G)
print("tetra dop", repr(math.sqrt(np.trace(Q[:3, :3]))))

# Raw-log time of flight
print("tof 70ms", repr(0.070 * 299792458.0))
