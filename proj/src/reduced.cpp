#include "tvx/reduced.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <map>

#include "tvx/errors.hpp"

namespace tvx {

namespace {

// collision guards act on the raw pairwise wrapped distance (force scales
// like its inverse); min_separation() reports a quarter of it
double raw_separation(const vortex_config& cfg) {
    if (cfg.size() < 2) return std::numeric_limits<double>::infinity();
    return 4.0 * min_separation(cfg);
}

void check_params(const sim_params& p) {
    if (!(p.dt > 0)) fail(errc::parameter, "sim params: dt must be positive");
    if (!(p.t_final >= 0)) fail(errc::parameter, "sim params: t_final must be nonnegative");
    if (p.mu < 0) fail(errc::parameter, "sim params: mu must be nonnegative");
    if (!(p.eps > 0) || !(p.eps < 1)) fail(errc::parameter, "sim params: eps must lie in (0,1)");
    if (!(p.collision_radius > 0)) fail(errc::parameter, "sim params: collision radius must be positive");
    if (p.output_stride < 1) fail(errc::parameter, "sim params: output stride must be >= 1");
}

void check_state(const reduced_state& s, const std::vector<int>& degrees) {
    if (s.lifted.size() != degrees.size() || s.velocities.size() != degrees.size())
        fail(errc::config, "reduced state: positions, velocities, degrees differ in length");
}

}  // namespace

double sim_params::k_eps() const { return 1.0 / std::abs(std::log(eps)); }

vortex_config reduced_state::project(const std::vector<int>& degrees) const {
    vortex_config cfg;
    cfg.positions.reserve(lifted.size());
    for (const vec2& p : lifted) cfg.positions.push_back({wrap_unit(p.x), wrap_unit(p.y)});
    cfg.degrees = degrees;
    return cfg;
}

const char* termination_name(termination t) {
    switch (t) {
        case termination::time_reached: return "TimeReached";
        case termination::collision: return "Collision";
        case termination::step_failure: return "StepFailure";
    }
    return "unknown";
}

reduced_state make_initial_state(const vortex_config& cfg, vec2 q0) {
    validate_config(cfg);
    try {
        require_lattice_compatible(cfg, q0);
    } catch (const error&) {
        fail(errc::invalid_initial_data,
             "initial momentum lift is not lattice-compatible with the vortex positions");
    }
    reduced_state s;
    s.lifted = cfg.positions;
    s.velocities.assign(cfg.size(), vec2{0, 0});
    s.q0 = q0;
    vec2 anchor{0, 0};
    for (std::size_t j = 0; j < cfg.size(); ++j)
        anchor += s.lifted[j] * static_cast<double>(cfg.degrees[j]);
    s.lift_anchor = q0 - anchor * (2 * M_PI);
    return s;
}

vec2 update_lift(const reduced_state& s, const std::vector<int>& degrees) {
    check_state(s, degrees);
    vec2 sum{0, 0};
    for (std::size_t j = 0; j < degrees.size(); ++j)
        sum += s.lifted[j] * static_cast<double>(degrees[j]);
    const vec2 q = s.lift_anchor + sum * (2 * M_PI);
    // a violation here means the lift bookkeeping broke, not a user error
    require_lattice_compatible(s.project(degrees), q, 1e-6);
    return q;
}

reduced_rhs ode_rhs(const green_evaluator& green, const reduced_state& s, const sim_params& p,
                    const std::vector<int>& degrees) {
    check_state(s, degrees);
    const vortex_config cfg = s.project(degrees);
    if (raw_separation(cfg) < p.collision_radius)
        fail(errc::collision_imminent, "vortex pair inside the collision radius");
    const vec2 q = update_lift(s, degrees);
    const std::vector<vec2> grad = renorm_grad(green, cfg, q);

    reduced_rhs out;
    out.velocities.resize(cfg.size());
    out.accelerations.assign(cfg.size(), vec2{0, 0});
    if (p.mu > 0) {
        for (std::size_t j = 0; j < cfg.size(); ++j) {
            out.velocities[j] = s.velocities[j];
            out.accelerations[j] =
                (grad[j] * (-1.0 / M_PI) - jrot(s.velocities[j]) * static_cast<double>(degrees[j])) *
                (1.0 / p.mu);
        }
    } else {
        for (std::size_t j = 0; j < cfg.size(); ++j)
            out.velocities[j] = jrot(grad[j]) * (static_cast<double>(degrees[j]) / M_PI);
    }
    return out;
}

reduced_state rk4_step(const green_evaluator& green, const reduced_state& s, const sim_params& p,
                       const std::vector<int>& degrees, double dt_override) {
    const double dt = dt_override > 0 ? dt_override : p.dt;
    auto stage = [&](const reduced_state& st) {
        try {
            return ode_rhs(green, st, p, degrees);
        } catch (const error& e) {
            if (e.code() == errc::collision_imminent)
                fail(errc::step_failure, "collision guard tripped inside an integration stage");
            throw;
        }
    };
    auto advance = [&](const reduced_rhs& k, double h) {
        reduced_state st = s;
        st.t = s.t + h;
        for (std::size_t j = 0; j < st.lifted.size(); ++j) {
            st.lifted[j] += k.velocities[j] * h;
            if (p.mu > 0) st.velocities[j] += k.accelerations[j] * h;
        }
        return st;
    };

    const reduced_rhs k1 = stage(s);
    const reduced_rhs k2 = stage(advance(k1, dt / 2));
    const reduced_rhs k3 = stage(advance(k2, dt / 2));
    const reduced_rhs k4 = stage(advance(k3, dt));

    reduced_state out = s;
    out.t = s.t + dt;
    for (std::size_t j = 0; j < out.lifted.size(); ++j) {
        out.lifted[j] += (k1.velocities[j] + (k2.velocities[j] + k3.velocities[j]) * 2.0 +
                          k4.velocities[j]) *
                         (dt / 6);
        if (p.mu > 0)
            out.velocities[j] += (k1.accelerations[j] +
                                  (k2.accelerations[j] + k3.accelerations[j]) * 2.0 +
                                  k4.accelerations[j]) *
                                 (dt / 6);
    }
    if (p.mu == 0) out.velocities = stage(out).velocities;  // for reporting only
    return out;
}

trajectory integrate(const green_evaluator& green, const vortex_config& cfg, vec2 q0,
                     const sim_params& p) {
    check_params(p);
    reduced_state s = make_initial_state(cfg, q0);

    trajectory traj;
    traj.degrees = cfg.degrees;
    auto record = [&](const reduced_state& st) {
        const vortex_config c = st.project(traj.degrees);
        const vec2 q = update_lift(st, traj.degrees);
        double v2 = 0;
        for (const vec2& v : st.velocities) v2 += norm2(v);
        traj.samples.push_back(st);
        traj.energy.push_back(renormalized_energy(green, c, q));
        traj.speed2.push_back(v2);
        traj.invariant.push_back(traj.energy.back() + 0.5 * M_PI * p.mu * v2);
        traj.separation.push_back(min_separation(c));
    };

    record(s);
    if (raw_separation(cfg) < p.collision_radius) {
        traj.reason = termination::collision;
        return traj;
    }

    const long nfull = static_cast<long>(std::floor(p.t_final / p.dt * (1 + 1e-12)));
    const double rem = p.t_final - static_cast<double>(nfull) * p.dt;
    const bool has_partial = rem > 1e-12 * p.t_final;
    long last_recorded = 0;
    for (long k = 1; k <= nfull + (has_partial ? 1 : 0); ++k) {
        const bool partial = k > nfull;
        try {
            s = rk4_step(green, s, p, traj.degrees, partial ? rem : -1.0);
        } catch (const error& e) {
            if (e.code() == errc::step_failure) {
                if (last_recorded != k - 1) record(s);  // last accepted state
                traj.reason = termination::step_failure;
                return traj;
            }
            throw;
        }
        // pin the clock to the step index: summing dt across thousands of
        // steps drifts by roundoff, and runs with different dt must land on
        // bitwise-identical sample times for trajectories to be comparable
        s.t = partial || (!has_partial && k == nfull)
                  ? p.t_final
                  : static_cast<double>(k) * p.dt;
        if (raw_separation(s.project(traj.degrees)) < p.collision_radius) {
            record(s);
            traj.reason = termination::collision;
            return traj;
        }
        if (partial || k == nfull || k % p.output_stride == 0) {
            record(s);
            last_recorded = k;
        }
    }
    traj.reason = termination::time_reached;
    return traj;
}

double invariant_drift(const trajectory& traj, const sim_params& p) {
    if (traj.samples.empty()) return 0.0;
    auto value = [&](std::size_t i) {
        return p.mu > 0 ? traj.energy[i] + 0.5 * M_PI * p.mu * traj.speed2[i] : traj.energy[i];
    };
    const double i0 = value(0);
    double worst = 0;
    for (std::size_t i = 1; i < traj.samples.size(); ++i)
        worst = std::max(worst, std::abs(value(i) - i0));
    return worst;
}

mu_sweep_report mu_sweep(const green_evaluator& green, const vortex_config& cfg, vec2 q0,
                         const std::vector<double>& mu_list, const sim_params& p,
                         double compare_t) {
    check_params(p);
    if (mu_list.empty()) fail(errc::parameter, "mu sweep: empty mu list");
    for (double mu : mu_list)
        if (mu < 0) fail(errc::parameter, "mu sweep: mu must be nonnegative");
    if (!(compare_t > 0) || compare_t > p.t_final * (1 + 1e-12))
        fail(errc::parameter, "mu sweep: compare time must lie in (0, t_final]");
    const double ref_mu = std::count(mu_list.begin(), mu_list.end(), 0.0) > 0
                              ? 0.0
                              : *std::min_element(mu_list.begin(), mu_list.end());

    std::vector<std::future<trajectory>> jobs;
    jobs.reserve(mu_list.size());
    for (double mu : mu_list)
        jobs.push_back(std::async(std::launch::async, [&, mu] {
            sim_params q = p;
            q.mu = mu;
            return integrate(green, cfg, q0, q);
        }));
    std::vector<trajectory> runs;
    runs.reserve(mu_list.size());
    for (auto& j : jobs) runs.push_back(j.get());

    const std::size_t ref_idx = static_cast<std::size_t>(
        std::find(mu_list.begin(), mu_list.end(), ref_mu) - mu_list.begin());
    const trajectory& ref = runs[ref_idx];

    mu_sweep_report report;
    report.compare_t = compare_t;
    report.reference_mu = ref_mu;

    // D(mu) is only meaningful over a window every run actually covers: a
    // guarded halt (collision) truncates the common horizon for all entries
    double window = compare_t;
    for (const trajectory& tr : runs) window = std::min(window, tr.samples.back().t);
    report.effective_t = window;

    // sample times are pinned to k*dt (identical across runs sharing dt and
    // stride), so pairing by exact time is safe and survives early halts
    // recording off-stride terminal samples
    std::map<double, std::size_t> ref_at;
    for (std::size_t k = 0; k < ref.samples.size(); ++k) ref_at[ref.samples[k].t] = k;

    for (std::size_t i = 0; i < mu_list.size(); ++i) {
        const trajectory& tr = runs[i];
        double dev = 0;
        for (const reduced_state& st : tr.samples) {
            if (st.t > window * (1 + 1e-9) + 1e-15) break;
            const auto it = ref_at.find(st.t);
            if (it == ref_at.end()) continue;
            const reduced_state& rs = ref.samples[it->second];
            for (std::size_t j = 0; j < st.lifted.size(); ++j) {
                const vec2 a = st.lifted[j];
                const vec2 b = rs.lifted[j];
                dev = std::max(dev, wrap_dist({wrap_unit(a.x), wrap_unit(a.y)},
                                              {wrap_unit(b.x), wrap_unit(b.y)}));
            }
        }
        report.entries.push_back({mu_list[i], dev});
    }
    return report;
}

}  // namespace tvx
