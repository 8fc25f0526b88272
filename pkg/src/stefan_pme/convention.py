"""Single home of the interface sign convention.

The flux-jump condition used everywhere in this package is

    k * rho_t * (1 + rho_lam) = - S * (a_plus * dv_plus/dlam - a_minus * dv_minus/dlam)

with lam the signed normal coordinate (positive on the plus side) and S the
tangential geometric factor (S = 1 for a flat front).  Consequences:

* a front with a balanced flux jump does not move;
* with a one-phase configuration (v_minus = 0) and a positive normal slope
  of v_plus, the front moves toward the minus side, i.e. the positive phase
  expands;
* a traveling wave with physical speed c > 0 into the empty phase has front
  slope s = -k*c/a_plus on the occupied side.

Both the nonlinear solver and the traveling-wave oracle must call these
helpers instead of spelling out signs locally.
"""


def front_speed(flux_jump, k, s_factor=1.0, one_plus_rho_lam=1.0):
    """Front normal velocity rho_t from the interface flux jump.

    flux_jump = a_plus * dv_plus/dlam - a_minus * dv_minus/dlam, evaluated
    on the interface.  Works elementwise on arrays.
    """
    return -s_factor * flux_jump / (k * one_plus_rho_lam)


def front_slope_from_speed(c, k, a_plus):
    """One-phase traveling-wave slope dV/dxi at the front for speed c."""
    return -k * c / a_plus


def stefan_residual(flux_jump, rho_t, k, s_factor=1.0, one_plus_rho_lam=1.0):
    """Defect of the interface condition; zero when the condition holds."""
    return s_factor * flux_jump + k * rho_t * one_plus_rho_lam
