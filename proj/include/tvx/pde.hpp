#pragma once

#include <vector>

#include "tvx/green.hpp"
#include "tvx/harmonic.hpp"
#include "tvx/reduced.hpp"
#include "tvx/renorm.hpp"
#include "tvx/torus.hpp"

namespace tvx {

// Field solvers for the two flows on the periodic grid:
//
//   wave flow (mu > 0):   mu k(eps) u_tt - i u_t = Lap u - (|u|^2 - 1) u / eps^2
//   Schrodinger (mu = 0):        - i u_t = Lap u - (|u|^2 - 1) u / eps^2
//
// with k(eps) = 1/|log eps|.  Space is discretized pseudospectrally on the
// n x n grid of harmonic.hpp; time stepping is Strang splitting for the
// Schrodinger flow and a three-level semi-implicit scheme for the wave flow.
// Parameters are carried in sim_params (mu, eps, dt) shared with the reduced
// law so that PDE runs and reduced runs are configured identically.

struct pde_state {
    grid_field u;       // current level
    grid_field u_prev;  // previous level; empty in Schrodinger mode
    double t = 0.0;
    sim_params params;
};

// Empirical stability limit for the explicit nonlinearity in the wave-flow
// stepper, 0.9 * min(eps^2 / 8, h / (4 pi)).
double pde_stable_dt(int n, double eps);

// Resonance-free time step for the splitting solver.  Linearizing the
// splitting about a near-unimodular state couples Fourier modes k0 +/- m
// through the phase rotation; the pair's relative linear phase per step is
// |2 pi m|^2 dt regardless of the carrier, and whenever it lands within
// ~atan(dt/eps^2) below a multiple of pi the pair is parametrically pumped
// at rate exp(dt/eps^2) per step, which turns rounding noise into an O(1)
// sideband after t ~ eps^2 log(1/machine eps).  Keeping
//     2 pi^2 n^2 dt < 0.9 pi,   i.e.  dt < 0.45 / n^2,
// places every representable difference mode below the first band, and the
// instability is absent at any run length.  The wave-flow stepper solves its
// linear part implicitly and does not need this bound.
double nls_stable_dt(int n);

// Initial state carrying the prescribed vortices: the canonical phase field
// of build_harmonic_map (positions snapped to cell centers, current integral
// adjusted accordingly) multiplied by one radial core factor per vortex,
//
//     u0(x) = H(x) * prod_j rho(wrap dist(x, a_j) / eps),
//
// where rho(s) is the radial profile of core_profile rescaled so its outer
// edge lands at s = 3: the unit-disk minimizer at core parameter 1/3 is the
// lowest-energy profile among all that reach 1 exactly at 3 eps, so |u0| = 1
// outside the union of the 3 eps core balls and |u0| <= C h / eps at the
// nodes nearest each vortex.  (If the profile solve fails, a rescaled
// tanh(s)/tanh(3) is substituted; the energy differs at O(eps^2).)  The
// initial velocity is zero; in wave mode u_prev is the backward Taylor level
//     u(-dt) = u0 + (dt^2/2) (Lap u0 - (|u0|^2 - 1) u0 / eps^2) / (mu k),
// consistent with u_t(0) = 0.  CoreUnresolved if eps < 4 h.
pde_state init_field(const green_evaluator& green, int n, const vortex_config& cfg, vec2 q,
                     const sim_params& p);

// One Strang step of the Schrodinger flow (params.mu must be 0): half-step
// exact phase rotation u *= exp(-i dt/2 (|u|^2-1)/eps^2) (|u| is invariant),
// full Fourier step with multiplier exp(-i |2 pi k|^2 dt), half rotation.
// Second order in dt; both substeps are isometries, so the discrete mass
// h^2 sum |u|^2 is conserved to rounding, and a plane wave exp(2 pi i m.x)
// is propagated exactly with frequency |2 pi m|^2.  Run with
// dt <= nls_stable_dt(n); above it sideband pairs are parametrically pumped
// (mass still conserved, energy not), see nls_stable_dt.
void step_nls(pde_state& s);

// One step of the three-level wave-flow scheme
//
//   mu k (u+ - 2u0 + u-)/dt^2 - i (u+ - u-)/(2dt)
//       = Lap(u+ + u-)/2 - (|u0|^2 - 1) u0 / eps^2,
//
// solved mode-by-mode in Fourier space (the implicit operator is diagonal;
// one complex division per mode).  Second order in dt; a plane wave is
// propagated with the physical root of -w - mu k w^2 + |2 pi m|^2 = 0
// matched to O(dt^2); setting mu = 0 reduces the update to a Crank-Nicolson
// Schrodinger step of size 2 dt.  UnstableStep if the half-level Hamiltonian
// jumps by more than 10% across the step.  Config if u_prev is missing.
void step_nlsw(pde_state& s);

// Quadratures used by the conservation diagnostics: the discrete mass
// h^2 sum |u|^2, the energy with spectral gradient part
//     E = (1/2) sum_k |2 pi k|^2 |c_k|^2 + h^2 sum (1 - |u|^2)^2 / (4 eps^2),
// and the Hamiltonian of a state, (mu k/2) h^2 sum |(u - u_prev)/dt|^2
// + (E(u) + E(u_prev))/2 at the trailing half level (E(u) alone when mu = 0).
double field_mass(const grid_field& u);
double field_energy(const grid_field& u, double eps);
double hamiltonian(const pde_state& s);

// Vortices detected in a field snapshot.  Entries parallel `previous` when
// identity matching is active; `lost` marks vortices with no detection
// within the matching radius this frame (their last position is carried).
struct tracked_vortices {
    std::vector<vec2> positions;
    std::vector<int> degrees;
    std::vector<char> lost;
    double t = 0.0;

    double min_pair_distance() const;  // wrapped; +inf for fewer than 2
};

// Plaquette winding scan: cells whose principal phase circulation is
// 2 pi (nonzero integer) hold a vortex; the sub-cell position is the common
// zero of the bilinear interpolants of Re u and Im u (Newton from the cell
// center, falling back to the center).  With empty `previous` every
// detection is returned in scan order; otherwise detections are matched to
// `previous` by nearest neighbor within 1/8 of the previous minimal pairwise
// distance, equal degree required, and unmatched entries come back flagged
// lost at their carried position.
tracked_vortices track_vortices(const pde_state& s, const tracked_vortices& previous);

// max_j wrap_dist(a_j, b_j) over paired positions (Parameter on size
// mismatch); zero when a snapshot is compared against itself
double max_wrapped_deviation(const std::vector<vec2>& a, const std::vector<vec2>& b);

enum class compare_end {
    window_done,    // compared through min(t_final, reduced end)
    core_overlap,   // a pair (tracked or reduced) closer than the overlap cut
};

const char* compare_end_name(compare_end e);

// PDE-versus-reduced-law comparison along one trajectory.
struct pde_compare_report {
    std::vector<double> times;       // sample times actually compared
    std::vector<double> deviations;  // max_j wrap dist, PDE tracked vs reduced
    double max_deviation = 0.0;
    double hamiltonian_drift = 0.0;  // max |H - H(0)| / (1 + |H(0)|)
    int losses = 0;                  // tracking losses observed in the window
    compare_end reason = compare_end::window_done;
    bool reduced_truncated = false;  // reduced run ended before t_final
    double compare_t = 0.0;          // last compared time
    double dt_bound = 0.0;           // stability bound used to pace the PDE
    double dt_used = 0.0;            // actual step (reduced sampling divided)
};

// Steps the PDE (wave flow when p.mu > 0, splitting otherwise) from
// init_field data and samples it at the reduced trajectory's own sample
// times, matching vortex identities frame to frame.  Starting positions,
// degrees, and the momentum lift are read off the trajectory itself (the
// field is built with current integral J q0), so the two sides cannot be
// configured inconsistently.  The comparison window
// is [0, min(p.t_final, end of `reduced`)]: a reduced run halted early by
// its collision guard shortens the window (reduced_truncated), and the
// window also closes once any vortex pair, tracked or reduced, comes within
// max(8h, 3 eps): overlapping cores are not two identifiable vortices, and a
// reduced sample that close describes no two-vortex field at this eps.
// Parameter if the reduced trajectory is empty, does not start at 0, or
// reached neither t_final nor a guard stop.
pde_compare_report run_pde_compare(const green_evaluator& green, int n, const sim_params& p,
                                   const trajectory& reduced);

}  // namespace tvx
