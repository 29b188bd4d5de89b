"""Emit the Joe-Kuo (new-joe-kuo-6.21201) direction numbers used by sobol.cpp.

scipy ships the table as an npz; this script converts the first N dimensions
into a C++ include. Dimension 0 is the van der Corput sequence and is not
listed.
"""
import os
import sys

import numpy as np
import scipy.stats

DIMS = int(sys.argv[1]) if len(sys.argv) > 1 else 200

path = os.path.join(os.path.dirname(scipy.stats.__file__), "_sobol_direction_numbers.npz")
table = np.load(path)
poly = table["poly"]
vinit = table["vinit"]

print("// Generated by scripts/gen_sobol_table.py. Do not edit.")
print("// {degree, coefficients, {m_1 .. m_degree}}")
for d in range(1, DIMS):
    p = int(poly[d])
    s = p.bit_length() - 1
    a = (p >> 1) & ((1 << (s - 1)) - 1) if s > 1 else 0
    m = ", ".join(str(int(v)) for v in vinit[d][:s])
    print(f"{{{s}, {a}, {{{m}}}}},")
