#pragma once

#include <vector>

#include "tvx/green.hpp"
#include "tvx/torus.hpp"

namespace tvx {

// A vortex configuration on the torus: positions a_j with degrees d_j in
// {+1, -1} summing to zero.  The zero-sum condition is what makes a finite
// interaction energy (and a single-valued far field) possible on a compact
// surface without boundary.
struct vortex_config {
    std::vector<vec2> positions;
    std::vector<int> degrees;

    std::size_t size() const { return positions.size(); }
};

// structural checks: matching sizes, degrees in {+1,-1}, zero total degree
void validate_config(const vortex_config& cfg);

// quarter of the minimal pairwise wrapped distance; the scale below which
// cores start to interact and above which the point-vortex reduction holds
double min_separation(const vortex_config& cfg);

// The momentum parameter q is only defined up to 2 pi Z^2; a given lift must
// satisfy q - 2 pi sum_j d_j a_j in 2 pi Z^2 (within tol) to belong to the
// configuration.  Throws LatticeViolation otherwise.
void require_lattice_compatible(const vortex_config& cfg, vec2 q, double tol = 1e-9);

// Renormalized interaction energy
//     W(a; q) = -pi sum_{k != l} d_k d_l F(a_k - a_l) + |q|^2 / 2,
// the finite part of the Ginzburg-Landau energy after the divergent
// per-vortex core contribution is stripped off.
double renormalized_energy(const green_evaluator& green, const vortex_config& cfg, vec2 q);

// Exact gradient with respect to each vortex position, with the q lift moving
// along (dq = 2 pi d_j da_j):
//     grad_{a_j} W = -2 pi d_j sum_{l != j} d_l grad F(a_j - a_l) + 2 pi d_j q.
std::vector<vec2> renorm_grad(const green_evaluator& green, const vortex_config& cfg, vec2 q);

// the eps -> 0 limit of (core energy - pi log(1/eps)) together with the
// epsilon schedule that produced it
struct core_constant {
    double gamma = 0.0;
    std::vector<double> epsilon_schedule;
};

// Estimates gamma by minimizing the radial core energy at each eps in the
// (decreasing) schedule and extrapolating the eps^2 error to zero using the
// last two entries.  eps values must lie in (0, 0.1].
core_constant core_energy_gamma(const std::vector<double>& eps_list);

// energy of the dressed configuration at finite eps:
//     W_eps = 2N (pi log(1/eps) + gamma) + W(a; q)
double w_eps(const green_evaluator& green, const vortex_config& cfg, vec2 q, double eps,
             const core_constant& gamma);

}  // namespace tvx
