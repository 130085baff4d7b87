"""Conditional KPZ fixed point laws, Tracy-Widom functions and Brownian bridge tails."""

from ._kpzcond import (
    LawResult,
    McEstimate,
    NumericalError,
    airy,
    bridge_tail_closed,
    bridge_tail_contour,
    bridge_tail_mc,
    f_flat,
    f_goe,
    f_gue,
    limit_tail,
    limit_tail_mc,
    log_p_flat,
    log_p_goe,
    log_p_gue,
    p_flat,
    p_goe,
    p_gue,
    qhat1_ratio,
    qhatn_smalln,
    sample_limit_field,
)

__all__ = [
    "LawResult",
    "McEstimate",
    "NumericalError",
    "airy",
    "bridge_tail_closed",
    "bridge_tail_contour",
    "bridge_tail_mc",
    "f_flat",
    "f_goe",
    "f_gue",
    "limit_tail",
    "limit_tail_mc",
    "log_p_flat",
    "log_p_goe",
    "log_p_gue",
    "p_flat",
    "p_goe",
    "p_gue",
    "qhat1_ratio",
    "qhatn_smalln",
    "sample_limit_field",
]
