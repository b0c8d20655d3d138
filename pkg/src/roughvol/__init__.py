# build in progress
from .specfun import bs_call, gamma_fn, implied_vol, lower_incomplete_gamma
from .quadrature import (
    QuadratureRule,
    WeightFunction,
    fractional_moment,
    fractional_weight,
    gauss_rule,
    general_weight,
)
