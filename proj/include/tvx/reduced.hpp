#pragma once

#include <vector>

#include "tvx/green.hpp"
#include "tvx/renorm.hpp"
#include "tvx/torus.hpp"

namespace tvx {

// State of the point-vortex law.  Positions are kept as unwrapped planar
// lifts: the momentum parameter q must vary continuously along the motion,
// and q_*(t) = q0 + 2 pi sum_j d_j (lift_j(t) - lift_j(0)) realizes the unique
// continuous choice.  Recomputing q from wrapped positions would jump by
// 2 pi whenever a vortex crosses a period seam.
struct reduced_state {
    double t = 0.0;
    std::vector<vec2> lifted;      // unwrapped positions
    std::vector<vec2> velocities;  // zero-filled when the law is first order
    vec2 q0{0, 0};                 // momentum lift at t = 0
    vec2 lift_anchor{0, 0};        // q0 - 2 pi sum_j d_j lift_j(0)

    vortex_config project(const std::vector<int>& degrees) const;
};

struct sim_params {
    double mu = 0.01;   // inertia parameter; 0 selects the first-order law
    double eps = 0.05;  // core size, used for k_eps reporting and PDE runs
    double dt = 1e-4;
    double t_final = 1.0;
    double collision_radius = 1e-3;  // raw pairwise wrapped distance
    int output_stride = 10;          // record every k-th step

    double k_eps() const;  // 1/|log eps|
};

// zero-velocity initial state with the given momentum lift;
// InvalidInitialData if q0 is not lattice-compatible with cfg
reduced_state make_initial_state(const vortex_config& cfg, vec2 q0);

// continuous momentum lift at the state's time; LatticeViolation if it
// drifted off the admissible lattice (a lift-tracking bug, not user error)
vec2 update_lift(const reduced_state& s, const std::vector<int>& degrees);

struct reduced_rhs {
    std::vector<vec2> velocities;     // d(lift)/dt
    std::vector<vec2> accelerations;  // d(velocity)/dt; zero when mu == 0
};

// Point-vortex law with inertia mu and gyroscopic coupling:
//     mu a_j'' + d_j J a_j' = -(1/pi) grad_j W(a; q_*(a)),
// J = [[0,1],[-1,0]].  For mu = 0, left-multiplying by -d_j J gives the
// first-order law a_j' = (d_j/pi) J grad_j W.
reduced_rhs ode_rhs(const green_evaluator& green, const reduced_state& s, const sim_params& p,
                    const std::vector<int>& degrees);

// classical RK4 over (positions, velocities) for mu > 0, positions alone for
// mu = 0; StepFailure if any stage evaluation trips the collision guard
reduced_state rk4_step(const green_evaluator& green, const reduced_state& s, const sim_params& p,
                       const std::vector<int>& degrees, double dt_override = -1.0);

enum class termination { time_reached, collision, step_failure };

const char* termination_name(termination t);

struct trajectory {
    std::vector<reduced_state> samples;
    std::vector<double> energy;      // W(a; q_*) per sample
    std::vector<double> speed2;      // sum_j |a_j'|^2 per sample
    std::vector<double> invariant;   // W + (mu pi / 2) * speed2
    std::vector<double> separation;  // min_separation per sample
    std::vector<int> degrees;
    termination reason = termination::time_reached;
};

// integrate from rest (zero velocity) until t_final, collision, or failure;
// samples are recorded at t=0, every output_stride steps, and the final state
trajectory integrate(const green_evaluator& green, const vortex_config& cfg, vec2 q0,
                     const sim_params& p);

// max deviation along the trajectory of the conserved quantity
// W + (mu pi/2)|a'|^2 (W alone when mu = 0)
double invariant_drift(const trajectory& traj, const sim_params& p);

struct mu_sweep_entry {
    double mu = 0.0;
    double deviation = 0.0;  // D(mu): sup over t <= compare_t of the worst
                             // per-vortex wrapped distance to the reference
};

struct mu_sweep_report {
    std::vector<mu_sweep_entry> entries;  // ordered as the input mu list
    double compare_t = 0.0;    // requested comparison horizon
    double effective_t = 0.0;  // horizon actually used: compare_t shortened to
                               // the earliest guarded halt among all runs, so
                               // every D(mu) covers the same time window
    double reference_mu = 0.0;
};

// runs one trajectory per mu (concurrently) and measures each against the
// reference (mu = 0 if present, else the smallest mu in the list)
mu_sweep_report mu_sweep(const green_evaluator& green, const vortex_config& cfg, vec2 q0,
                         const std::vector<double>& mu_list, const sim_params& p,
                         double compare_t = 0.5);

}  // namespace tvx
