#pragma once

#include <vector>

namespace tvx {

// Radial vortex core profile on the unit disk: the minimizer f of
//
//     E(f) = 2 pi int_0^1 [ (f'^2 + f^2/r^2)/2 + (1 - f^2)^2/(4 eps^2) ] r dr
//
// over f(0) = 0, f(1) = 1.  E(f) - pi log(1/eps) stays bounded as eps -> 0;
// its limit is the core constant gamma used by the dressed vortex energy.
// The boundary layer at r ~ eps is resolved with the graded mesh
// r_i = (i/M)^2, which clusters nodes quadratically near the origin.

struct core_profile_params {
    double eps = 0.05;
    int mesh_points = 2000;   // M; nodes r_i = (i/M)^2, i = 0..M
    double grad_tol = 1e-10;  // termination: energy gradient norm (method A)
                              // or scaled ODE residual (method B)
    int max_iter = 100;
};

struct core_profile {
    double eps = 0.0;
    std::vector<double> r;  // M+1 nodes, r.front() = 0, r.back() = 1
    std::vector<double> f;  // profile values, f.front() = 0, f.back() = 1
    double energy = 0.0;    // E(f) of the piecewise-linear interpolant

    // gamma estimate at this eps, before extrapolation
    double gamma_estimate() const;

    // monotone cubic interpolation of the samples; 0 below r = 0 and 1 above
    // r = 1, so the profile extends to the whole of [0, infinity)
    double value(double rr) const;
};

// Method A: damped Newton minimization of the discretized energy itself
// (piecewise-linear elements, two-point Gauss quadrature per element).
core_profile minimize_profile_energy(const core_profile_params& p);

// Method B: damped Newton collocation solve of the Euler-Lagrange equation
//     f'' + f'/r - f/r^2 + (1 - f^2) f / eps^2 = 0
// on the same mesh; an independent route to the same profile.
core_profile solve_profile_ode(const core_profile_params& p);

// Energy of the piecewise-linear interpolant of arbitrary nodal values on an
// arbitrary radial mesh, with the same quadrature the solvers use.  Exposed
// so callers can evaluate trial profiles (e.g. upper-bound tests).
double profile_energy(const std::vector<double>& r, const std::vector<double>& f, double eps);

}  // namespace tvx
