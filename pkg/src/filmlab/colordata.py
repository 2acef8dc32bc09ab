"""Embedded colorimetric reference tables.

D65 relative spectral power at 5 nm steps, CIE 1964 10-degree observer
color matching functions at 10 nm steps (linearly interpolated once to
the 5 nm integration grid), and the photopic luminous efficiency V at
10 nm steps. All tables span 380-780 nm.
"""

from __future__ import annotations

import numpy as np

WL_5NM = np.arange(380, 781, 5, dtype=float)
WL_10NM = np.arange(380, 781, 10, dtype=float)

# CIE standard illuminant D65, relative SPD (100 at 560 nm), 380-780 nm, 5 nm
D65_5NM = np.array([
    49.98, 52.31, 54.65, 68.70, 82.75, 87.12, 91.49, 92.46, 93.43, 90.06,
    86.68, 95.77, 104.86, 110.94, 117.01, 117.41, 117.81, 116.34, 114.86,
    115.39, 115.92, 112.37, 108.81, 109.08, 109.35, 108.58, 107.80, 106.30,
    104.79, 106.24, 107.69, 106.05, 104.41, 104.23, 104.05, 102.02, 100.00,
    98.17, 96.33, 96.06, 95.79, 92.24, 88.69, 89.35, 90.01, 89.80, 89.60,
    88.65, 87.70, 85.49, 83.29, 83.49, 83.70, 81.86, 80.03, 80.12, 80.21,
    81.25, 82.28, 80.28, 78.28, 74.00, 69.72, 70.67, 71.61, 72.98, 74.35,
    67.98, 61.60, 65.74, 69.89, 72.49, 75.09, 69.34, 63.59, 55.01, 46.42,
    56.61, 66.81, 65.09, 63.38,
])

# CIE 1964 10-degree observer, (xbar, ybar, zbar), 380-780 nm, 10 nm
CMF_1964_10NM = np.array([
    [0.0002, 0.0000, 0.0007],
    [0.0024, 0.0003, 0.0105],
    [0.0191, 0.0020, 0.0860],
    [0.0847, 0.0088, 0.3894],
    [0.2045, 0.0214, 0.9725],
    [0.3147, 0.0387, 1.5535],
    [0.3837, 0.0621, 1.9673],
    [0.3707, 0.0895, 1.9948],
    [0.3023, 0.1282, 1.7454],
    [0.1956, 0.1852, 1.3176],
    [0.0805, 0.2536, 0.7721],
    [0.0162, 0.3391, 0.4153],
    [0.0038, 0.4608, 0.2185],
    [0.0375, 0.6067, 0.1120],
    [0.1177, 0.7618, 0.0607],
    [0.2365, 0.8752, 0.0305],
    [0.3768, 0.9620, 0.0137],
    [0.5298, 0.9918, 0.0040],
    [0.7052, 0.9973, 0.0000],
    [0.8787, 0.9556, 0.0000],
    [1.0142, 0.8689, 0.0000],
    [1.1185, 0.7774, 0.0000],
    [1.1240, 0.6583, 0.0000],
    [1.0305, 0.5280, 0.0000],
    [0.8563, 0.3981, 0.0000],
    [0.6475, 0.2835, 0.0000],
    [0.4316, 0.1798, 0.0000],
    [0.2683, 0.1076, 0.0000],
    [0.1526, 0.0603, 0.0000],
    [0.0813, 0.0318, 0.0000],
    [0.0409, 0.0159, 0.0000],
    [0.0199, 0.0077, 0.0000],
    [0.0096, 0.0037, 0.0000],
    [0.0046, 0.0018, 0.0000],
    [0.0022, 0.0008, 0.0000],
    [0.0010, 0.0004, 0.0000],
    [0.0005, 0.0002, 0.0000],
    [0.0003, 0.0001, 0.0000],
    [0.0001, 0.0000, 0.0000],
    [0.0001, 0.0000, 0.0000],
    [0.0000, 0.0000, 0.0000],
])

# 5 nm integration grid: table values at 10 nm anchors, linear midpoints between
CMF_1964_5NM = np.column_stack([
    np.interp(WL_5NM, WL_10NM, CMF_1964_10NM[:, k]) for k in range(3)
])

# Photopic luminous efficiency V(lambda), 380-780 nm, 10 nm
V_PHOTOPIC_10NM = np.array([
    0.0000, 0.0001, 0.0004, 0.0012, 0.0040, 0.0116, 0.0230, 0.0380, 0.0600,
    0.0910, 0.1390, 0.2080, 0.3230, 0.5030, 0.7100, 0.8620, 0.9540, 0.9950,
    0.9950, 0.9520, 0.8700, 0.7570, 0.6310, 0.5030, 0.3810, 0.2650, 0.1750,
    0.1070, 0.0610, 0.0320, 0.0170, 0.0082, 0.0041, 0.0021, 0.0010, 0.0005,
    0.0002, 0.0001, 0.0001, 0.0000, 0.0000,
])

D65_10NM = D65_5NM[::2]
