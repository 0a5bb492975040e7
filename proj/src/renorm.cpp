#include "tvx/renorm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tvx/core_profile.hpp"
#include "tvx/errors.hpp"

namespace tvx {

namespace {

// raw minimal pairwise wrapped distance (min_separation returns a quarter of
// this); also the quantity the degeneracy threshold applies to
double raw_min_distance(const vortex_config& cfg) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cfg.size(); ++j)
        for (std::size_t k = j + 1; k < cfg.size(); ++k)
            best = std::min(best, wrap_dist(cfg.positions[j], cfg.positions[k]));
    return best;
}

void require_evaluable(const vortex_config& cfg) {
    validate_config(cfg);
    if (cfg.size() >= 2 && raw_min_distance(cfg) < 1e-9)
        fail(errc::degenerate_config, "vortex positions closer than 1e-9; interaction energy lost all digits");
}

}  // namespace

void validate_config(const vortex_config& cfg) {
    if (cfg.positions.size() != cfg.degrees.size())
        fail(errc::config, "vortex config: positions and degrees differ in length");
    if (cfg.positions.empty()) fail(errc::config, "vortex config: empty");
    int total = 0;
    for (int d : cfg.degrees) {
        if (d != 1 && d != -1) fail(errc::config, "vortex degrees must be +1 or -1");
        total += d;
    }
    if (total != 0) fail(errc::config, "vortex degrees must sum to zero");
}

double min_separation(const vortex_config& cfg) {
    if (cfg.positions.empty()) fail(errc::config, "vortex config: empty");
    if (cfg.size() < 2) return std::numeric_limits<double>::infinity();
    return 0.25 * raw_min_distance(cfg);
}

void require_lattice_compatible(const vortex_config& cfg, vec2 q, double tol) {
    vec2 anchor{0, 0};
    for (std::size_t j = 0; j < cfg.size(); ++j)
        anchor += cfg.positions[j] * static_cast<double>(cfg.degrees[j]);
    const vec2 v = (q - anchor * (2 * M_PI)) * (1.0 / (2 * M_PI));
    auto off_lattice = [tol](double t) { return std::abs(t - std::round(t)) > tol; };
    if (off_lattice(v.x) || off_lattice(v.y))
        fail(errc::lattice_violation,
             "momentum lift q is not in 2 pi sum(d_j a_j) + 2 pi Z^2 for this configuration");
}

double renormalized_energy(const green_evaluator& green, const vortex_config& cfg, vec2 q) {
    require_evaluable(cfg);
    require_lattice_compatible(cfg, q);
    double sum = 0;
    for (std::size_t k = 0; k < cfg.size(); ++k)
        for (std::size_t l = 0; l < cfg.size(); ++l) {
            if (k == l) continue;
            sum += cfg.degrees[k] * cfg.degrees[l] * green.eval(cfg.positions[k] - cfg.positions[l]);
        }
    return -M_PI * sum + 0.5 * dot(q, q);
}

std::vector<vec2> renorm_grad(const green_evaluator& green, const vortex_config& cfg, vec2 q) {
    require_evaluable(cfg);
    require_lattice_compatible(cfg, q);
    std::vector<vec2> out(cfg.size());
    for (std::size_t j = 0; j < cfg.size(); ++j) {
        vec2 s{0, 0};
        for (std::size_t l = 0; l < cfg.size(); ++l) {
            if (l == j) continue;
            s += green.grad(cfg.positions[j] - cfg.positions[l]) *
                 static_cast<double>(cfg.degrees[l]);
        }
        out[j] = (q - s) * (2 * M_PI * cfg.degrees[j]);
    }
    return out;
}

core_constant core_energy_gamma(const std::vector<double>& eps_list) {
    if (eps_list.empty()) fail(errc::parameter, "core constant: empty eps schedule");
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        if (!(eps_list[i] > 0.0) || eps_list[i] > 0.1)
            fail(errc::parameter, "core constant: eps values must lie in (0, 0.1]");
        if (i > 0 && eps_list[i] >= eps_list[i - 1])
            fail(errc::parameter, "core constant: eps schedule must be strictly decreasing");
    }
    std::vector<double> est(eps_list.size());
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        core_profile_params p;
        p.eps = eps_list[i];
        est[i] = minimize_profile_energy(p).gamma_estimate();
    }
    core_constant out;
    out.epsilon_schedule = eps_list;
    if (est.size() == 1) {
        out.gamma = est[0];
        return out;
    }
    // the estimate approaches gamma like c*eps^2; eliminate that term with
    // the two smallest eps in the schedule
    const double e1 = eps_list[eps_list.size() - 2], e2 = eps_list.back();
    const double g1 = est[est.size() - 2], g2 = est.back();
    out.gamma = (g2 * e1 * e1 - g1 * e2 * e2) / (e1 * e1 - e2 * e2);
    return out;
}

double w_eps(const green_evaluator& green, const vortex_config& cfg, vec2 q, double eps,
             const core_constant& gamma) {
    if (!(eps > 0.0) || !(eps < 1.0)) fail(errc::parameter, "w_eps: eps must lie in (0, 1)");
    const double n2 = static_cast<double>(cfg.size());  // 2N vortices
    return n2 * (M_PI * std::log(1.0 / eps) + gamma.gamma) +
           renormalized_energy(green, cfg, q);
}

}  // namespace tvx
