"""Reference values frozen from independent computations.

Bessel values: mpmath at 30 digits.  Critical distance: direct evaluation
of the closed form.  Profile-error values: exact piecewise integration
cross-checked with scipy quad over the radial variable.
"""

# (order, x, J_l(x), Y_l(x))
BESSEL = [
    (0, 1.0, 0.76519768655796655145, 0.088256964215676957983),
    (1, 0.5, 0.24226845767487388638, -1.4714723926702430692),
    (0, 10.0, -0.2459357644513483352, 0.055671167283599391424),
    (1, 10.0, 0.04347274616886143667, 0.24901542420695388392),
    (2, 10.0, 0.25463031368512062253, -0.0058680824422086146398),
    (5, 3.0, 0.043028434877047583925, -1.9059459538286737322),
    (10, 2.0, 2.5153862827167367096e-7, -129184.54220803928264),
    (20, 25.0, 0.05199404922830323178, 0.19804074776289243611),
    (3, 0.05, 2.6037597910554325257e-6, -40756.401812523346776),
    (40, 30.0, 0.00036120236088965853089, -33.393668907330313538),
]
J0_FIRST_ZERO = 2.40482555769577276862

# pi^(-1/2) (Gamma(3) ln 200 / 200)^(1/4) and the sqrt-index part times 5.3
D1_RADIUS = 0.2706821116456479
D1_INDEX = 1.434615191721934

# profile errors for the two worked identification examples
EPS_ERR_Q2_EXAMPLE = 0.04791704688929457
EPS_ERR_Q3_EXAMPLE = 0.04129672585086996

Q1_TRUTH = (0.72, 4.2025)
Q2_TRUTH = (0.4, 0.6, 0.49, 9.0)
Q3_TRUTH = (0.3, 0.7, 0.8, 4.0, 25.0, 9.0)
FIG1_NEIGHBOUR = (0.3794, 0.5662, 0.6377, 0.040, 8.282, 5.969)
