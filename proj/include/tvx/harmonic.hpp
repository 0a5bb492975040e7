#pragma once

#include <complex>
#include <vector>

#include "tvx/green.hpp"
#include "tvx/renorm.hpp"
#include "tvx/torus.hpp"

namespace tvx {

// Complex field sampled at the n x n nodes (i/n, j/n) with periodic
// indexing; storage is x-major: node (i, j) lives at values[i*n + j].
struct grid_field {
    int n = 0;
    std::vector<std::complex<double>> values;

    double h() const { return 1.0 / n; }
    vec2 node(int i, int j) const { return {i * h(), j * h()}; }
    static int wrap_index(int i, int n) { return ((i % n) + n) % n; }
    std::complex<double> at(int i, int j) const {
        return values[static_cast<std::size_t>(wrap_index(i, n)) * n + wrap_index(j, n)];
    }
    std::complex<double>& at(int i, int j) {
        return values[static_cast<std::size_t>(wrap_index(i, n)) * n + wrap_index(j, n)];
    }
};

// Pointwise diagnostics of a complex field: current j(v) = Im(conj(v) grad v),
// energy density (1/2)|grad v|^2 + (1-|v|^2)^2/(4 eps^2), Jacobian
// Im(d_x conj(v) d_y v).  Gradients are second-order central periodic
// differences; totals are the h^2-weighted node sums (midpoint = trapezoid on
// a periodic grid), so the examples below hold up to O(h^2) discretization.
struct field_diagnostics {
    int n = 0;
    std::vector<double> energy_density;
    std::vector<vec2> current;
    std::vector<double> jacobian;
    double total_energy = 0.0;
    vec2 total_momentum{0, 0};
};

field_diagnostics diagnose_field(const grid_field& f, double eps);

// What build_harmonic_map actually constructed: positions are snapped to the
// nearest cell center (fractional node offset 1/2 per coordinate, a move of
// at most h/2 per component, maximizing clearance from grid lines) and the
// current integral picks up the matching lattice adjustment
// 2 pi J sum_j d_j (a_j' - a_j) so the field stays single-valued.
struct harmonic_build_info {
    vortex_config cfg_used;
    vec2 q_used{0, 0};
    double max_perturbation = 0.0;  // max per-component move, in units of 1
};

// Unimodular field H = exp(i theta) whose current grad theta equals
//     g(x) = q - sum_j d_j J grad F(x - a_j),
// assembled by integrating g exactly along a comb spanning tree of the grid
// (spine j = 0, vertical teeth).  Each edge contributes the principal angle
// increment of the nearest vortex image (the log part of F integrates to the
// angular field) plus a midpoint quadrature of the smooth remainder.
//
// q is the prescribed current integral of the field.  Single-valuedness on
// the torus forces q = 2 pi J sum_j d_j a_j modulo 2 pi Z^2 (the circulation
// along the x-cycle couples to vortex heights and vice versa);
// InvalidInitialData otherwise.  A reduced-law momentum lift p compatible
// with cfg always yields an admissible current integral q = J p.
// GridTooCoarse when n < 16 * (number of vortices).  An empty cfg is allowed
// and produces the plane wave exp(i q.x), q in 2 pi Z^2.
grid_field build_harmonic_map(const green_evaluator& green, int n, const vortex_config& cfg,
                              vec2 q, harmonic_build_info* info = nullptr);

// Verification of the four defining properties of the constructed field.
// Windings are plaquette sums of principal phase differences (exact integer
// multiples of 2 pi by construction).  The divergence residual is the
// central-difference divergence of the discrete current, reported away from
// cores (distance > r_cut = max(4h, r) with r = min_separation); its
// truncation error grows like h^2/r^4 toward a core, so the bound takes the
// form h + 12 h^2 / r_cut^4, which is O(h) at any fixed cut.  The momentum
// uses principal phase-difference currents with the near-core cells
// (Chebyshev distance < max(4.5h, min(0.1, min_separation))) replaced by
// exact rectangle integrals of the angular field plus a midpoint value of
// the smooth remainder, which restores second-order accuracy that a plain
// node sum loses to the core singularities.
struct canonical_report {
    double max_unimodularity = 0.0;   // max | |H| - 1 |
    double max_div_residual = 0.0;    // away from cores
    int worst_div_i = 0, worst_div_j = 0;
    std::vector<int> windings;        // per vortex, from its containing plaquette
    bool windings_match = false;      // windings == degrees and zero elsewhere
    vec2 momentum{0, 0};              // core-corrected current integral
    double momentum_residual = 0.0;   // |momentum - q|
    double unimodularity_bound = 1e-12;
    double div_bound = 0.0;           // h + 12 h^2 / r_cut^4 (h alone if no cores)
    double momentum_bound = 0.0;      // max(2 h^2, 5e-3)
    bool pass = false;
};

canonical_report verify_canonical(const green_evaluator& green, const grid_field& f,
                                  const vortex_config& cfg, vec2 q, double eps);

// Test function eta(x) = direction.(x - a_j) w(|x - a_j|) with w a quintic
// smoothstep window: identically 1 inside r_linear (eta exactly linear, zero
// Hessian) and 0 beyond r_support.  EtaSpecInvalid unless
// 0 < r_linear < r_support <= min_separation (keeps other vortices outside
// the support).
struct eta_spec {
    vec2 direction{1, 0};
    double r_linear = 0.0;
    double r_support = 0.0;
};

// Closed-form Hessian of the test function at offset u from its center;
// row-major symmetric 2x2 {hxx, hxy, hyy}.  Exposed for oracle tests.
struct eta_hessian {
    double hxx = 0.0, hxy = 0.0, hyy = 0.0;
};
eta_hessian eta_hessian_at(const eta_spec& spec, vec2 u);
double eta_value_at(const eta_spec& spec, vec2 u);

// Quadrature check of the pairing identity
//     integral < Hess(eta) j(H), J j(H) > dx = -grad eta(a_j) . J grad_j W(a; q),
// the weak form tying the field's current to the configuration force.  q is
// the reduced-law momentum lift; the field is built with current integral
// J q (the admissible rotation, see build_harmonic_map) at the perturbed
// positions, and the right side uses renorm_grad at those same positions.
// The left side sums h^2 <Hess(eta) j, J j> over nodes outside a 4h core
// disk (the Hessian vanishes inside r_linear anyway whenever r_linear > 4h).
struct pairing_result {
    double lhs = 0.0;
    double rhs = 0.0;
    double abs_err = 0.0;
};

pairing_result hessian_pairing_check(const green_evaluator& green, const vortex_config& cfg,
                                     vec2 q, std::size_t j_index, const eta_spec& spec, int n);

}  // namespace tvx
