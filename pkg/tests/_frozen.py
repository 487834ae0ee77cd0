"""Frozen reference constants.

Generated by tools/compute_oracle_values.py; do not edit by hand.
"""

PHI_HALF = 4.670774270471605
PHI_TENTH = 22023.747512978257
PHI_QUARTER = 51.879868204685194
PHI_INV_100 = 0.21588992540847544
PHI_INV_PHI_HALF = 0.5
B_HALF_PHIHALF = 0.40162576089523659
B_X001_C1 = 0.01
B_X001_C100 = 0.01
B_X001_CM100 = 0.01
DB_DX_X001_C1 = 1.0
D2B_DX2_X001_C1 = -3.7952215107364568e-40
DB_DX_X001_C100 = 1.0
D2B_DX2_X001_C100 = -3.7952215107364568e-38
DXR_TENTH = -2202646.5794806717
RATIO_DR_TENTH = 1.0001481120234664
RATIO_DTHETA_TENTH = 0.15915690736537883
L2_EXP_HALFLINE = 0.70710678118654752
BUMP_INTEGRAL = 0.44399381616807944
BUMP_SQ_INTEGRAL = 0.13308612084499427
BUMP_L2_NORMALIZER = 2.7411551457069723
CUTOFF_BETA_M09 = 0.99982721417019408
CUTOFF_BETA_M05 = 0.87703271672267092
CUTOFF_BETA_P03 = 0.25909202535619201
CUTOFF_BETA_P09 = 0.00017278582980592477
