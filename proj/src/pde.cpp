#include "tvx/pde.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <map>
#include <vector>

#include "tvx/core_profile.hpp"
#include "tvx/errors.hpp"

namespace tvx {

namespace {

using cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// Fourier transforms.  One out-of-place plan pair per grid size, created with
// FFTW_ESTIMATE | FFTW_UNALIGNED so the same plan serves any caller buffer
// through the new-array interface.  Time stepping is serial, so a plain
// static cache is enough.

struct plan_pair {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
};

plan_pair& plans_for(int n) {
    static std::map<int, plan_pair> cache;
    auto it = cache.find(n);
    if (it == cache.end()) {
        std::vector<cplx> a(static_cast<std::size_t>(n) * n), b(a.size());
        plan_pair p;
        p.fwd = fftw_plan_dft_2d(n, n, reinterpret_cast<fftw_complex*>(a.data()),
                                 reinterpret_cast<fftw_complex*>(b.data()), FFTW_FORWARD,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
        p.bwd = fftw_plan_dft_2d(n, n, reinterpret_cast<fftw_complex*>(a.data()),
                                 reinterpret_cast<fftw_complex*>(b.data()), FFTW_BACKWARD,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (p.fwd == nullptr || p.bwd == nullptr) fail(errc::config, "fft planning failed");
        it = cache.emplace(n, p).first;
    }
    return it->second;
}

// out must be a distinct buffer; resized here
void dft(int n, bool forward, const std::vector<cplx>& in, std::vector<cplx>& out) {
    out.resize(in.size());
    plan_pair& p = plans_for(n);
    fftw_execute_dft(forward ? p.fwd : p.bwd,
                     reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data())),
                     reinterpret_cast<fftw_complex*>(out.data()));
}

// symbol of -Lap: |2 pi k|^2 with the centered integer frequency
double lap_symbol(int i, int j, int n) {
    const double ki = i <= n / 2 ? i : i - n;
    const double kj = j <= n / 2 ? j : j - n;
    return 4.0 * M_PI * M_PI * (ki * ki + kj * kj);
}

void require_grid(const grid_field& f, const char* who) {
    if (f.n < 2 || f.values.size() != static_cast<std::size_t>(f.n) * f.n)
        fail(errc::config, std::string(who) + ": malformed grid");
}

void require_time_params(const sim_params& p, const char* who) {
    if (!(p.dt > 0.0)) fail(errc::parameter, std::string(who) + ": dt must be positive");
    if (!(p.eps > 0.0) || !(p.eps < 1.0))
        fail(errc::parameter, std::string(who) + ": eps must lie in (0, 1)");
    if (!(p.mu >= 0.0)) fail(errc::parameter, std::string(who) + ": mu must be nonnegative");
}

// ---------------------------------------------------------------------------
// Radial core factor rho(s).  The unit-disk minimizer at core parameter 1/3,
// read at s/3, is the lowest-energy profile among all that reach 1 exactly at
// the ball edge; placing that edge at wrap distance 3 eps makes |u0| exactly 1
// outside the core balls while keeping the core energy within O(eps^2) of the
// optimal dressed-vortex value.  Computed once; a rescaled tanh stands in if
// the profile solve ever fails.

struct core_factor {
    core_profile prof;
    bool have_profile = false;

    double operator()(double s) const {
        if (s >= 3.0) return 1.0;
        if (have_profile) return prof.value(s / 3.0);
        return std::tanh(s) / std::tanh(3.0);
    }
};

const core_factor& core_rho() {
    static const core_factor rho = [] {
        core_factor r;
        try {
            core_profile_params cp;
            cp.eps = 1.0 / 3.0;
            r.prof = minimize_profile_energy(cp);
            r.have_profile = true;
        } catch (const error&) {
            r.have_profile = false;
        }
        return r;
    }();
    return rho;
}

double sq(double x) { return x * x; }

// gradient part of the energy from an unnormalized spectrum: the Fourier
// coefficients are hat/n^2, so (1/2) sum |2 pi k|^2 |c_k|^2 carries 1/n^4
double gradient_energy(const std::vector<cplx>& hat, int n) {
    double g = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            g += lap_symbol(i, j, n) * std::norm(hat[static_cast<std::size_t>(i) * n + j]);
    const double n2 = static_cast<double>(n) * n;
    return 0.5 * g / (n2 * n2);
}

double potential_energy(const std::vector<cplx>& u, int n, double eps) {
    double pot = 0.0;
    for (const cplx& v : u) pot += sq(1.0 - std::norm(v));
    return pot / (4.0 * eps * eps * static_cast<double>(n) * n);
}

double half_level_kinetic(const std::vector<cplx>& u, const std::vector<cplx>& u_prev, int n,
                          double mu_k, double dt) {
    double ke = 0.0;
    for (std::size_t m = 0; m < u.size(); ++m) ke += std::norm(u[m] - u_prev[m]);
    return 0.5 * mu_k * ke / (dt * dt * static_cast<double>(n) * n);
}

}  // namespace

double pde_stable_dt(int n, double eps) {
    if (n < 2) fail(errc::grid_too_coarse, "pde_stable_dt: grid too small");
    if (!(eps > 0.0)) fail(errc::parameter, "pde_stable_dt: eps must be positive");
    return 0.9 * std::min(eps * eps / 8.0, 1.0 / (4.0 * M_PI * n));
}

double nls_stable_dt(int n) {
    if (n < 2) fail(errc::grid_too_coarse, "nls_stable_dt: grid too small");
    // First parametric band sits at relative phase pi; the largest difference
    // mode on the grid has |2 pi m|^2 = 2 pi^2 n^2.
    return 0.9 * M_PI / (2.0 * M_PI * M_PI * double(n) * double(n));
}

pde_state init_field(const green_evaluator& green, int n, const vortex_config& cfg, vec2 q,
                     const sim_params& p) {
    require_time_params(p, "init_field");
    if (n < 2) fail(errc::grid_too_coarse, "init_field: grid too small");
    if (!(p.eps >= 4.0 / n))
        fail(errc::core_unresolved, "init_field: eps below 4 h, cores unresolved");

    pde_state s;
    s.params = p;
    harmonic_build_info info;
    s.u = build_harmonic_map(green, n, cfg, q, &info);

    const core_factor& rho = core_rho();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double mod = 1.0;
            for (std::size_t l = 0; l < info.cfg_used.size(); ++l)
                mod *= rho(wrap_dist(s.u.node(i, j), info.cfg_used.positions[l]) / p.eps);
            s.u.at(i, j) *= mod;
        }

    if (p.mu > 0.0) {
        // u(-dt) = u0 + (dt^2/2) u_tt(0) with u_tt(0) = (Lap u0 - f(u0))/(mu k),
        // the unique two-level start consistent with zero initial velocity
        std::vector<cplx> hat, lap;
        dft(n, true, s.u.values, hat);
        const double inv_n2 = 1.0 / (static_cast<double>(n) * n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                hat[static_cast<std::size_t>(i) * n + j] *= -lap_symbol(i, j, n) * inv_n2;
        dft(n, false, hat, lap);

        const double ie2 = 1.0 / (p.eps * p.eps);
        const double c = p.dt * p.dt / (2.0 * p.mu * p.k_eps());
        s.u_prev.n = n;
        s.u_prev.values.resize(s.u.values.size());
        for (std::size_t m = 0; m < s.u.values.size(); ++m) {
            const cplx v = s.u.values[m];
            s.u_prev.values[m] = v + c * (lap[m] - ie2 * (std::norm(v) - 1.0) * v);
        }
    }
    return s;
}

void step_nls(pde_state& s) {
    require_grid(s.u, "step_nls");
    require_time_params(s.params, "step_nls");
    if (s.params.mu != 0.0)
        fail(errc::parameter, "step_nls: mu must be 0 (the wave flow steps with step_nlsw)");

    const int n = s.u.n;
    const double dt = s.params.dt;
    const double ie2 = 1.0 / (s.params.eps * s.params.eps);
    const auto rotate_half = [&] {
        for (cplx& v : s.u.values) v *= std::polar(1.0, -0.5 * dt * ie2 * (std::norm(v) - 1.0));
    };

    rotate_half();
    std::vector<cplx> hat;
    dft(n, true, s.u.values, hat);
    const double inv_n2 = 1.0 / (static_cast<double>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            hat[static_cast<std::size_t>(i) * n + j] *= std::polar(inv_n2, -lap_symbol(i, j, n) * dt);
    dft(n, false, hat, s.u.values);
    rotate_half();
    s.t += dt;
}

void step_nlsw(pde_state& s) {
    require_grid(s.u, "step_nlsw");
    require_time_params(s.params, "step_nlsw");
    if (s.u_prev.n != s.u.n || s.u_prev.values.size() != s.u.values.size())
        fail(errc::config, "step_nlsw: previous level missing or mismatched");

    const int n = s.u.n;
    const double dt = s.params.dt;
    const double mu_k = s.params.mu * s.params.k_eps();
    const double a = mu_k / (dt * dt);
    const double b = 1.0 / (2.0 * dt);
    const double ie2 = 1.0 / (s.params.eps * s.params.eps);

    std::vector<cplx> f(s.u.values.size());
    for (std::size_t m = 0; m < f.size(); ++m) {
        const cplx v = s.u.values[m];
        f[m] = ie2 * (std::norm(v) - 1.0) * v;
    }

    std::vector<cplx> f_hat, u0_hat, um_hat;
    dft(n, true, f, f_hat);
    dft(n, true, s.u.values, u0_hat);
    dft(n, true, s.u_prev.values, um_hat);

    // per-mode solve; the spectra of the three levels also give the gradient
    // energies for the stability guard at no extra transform cost
    std::vector<cplx> up_hat(f_hat.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const std::size_t m = static_cast<std::size_t>(i) * n + j;
            const double half_l = 0.5 * lap_symbol(i, j, n);
            const cplx num = 2.0 * a * u0_hat[m] - cplx(a + half_l, b) * um_hat[m] - f_hat[m];
            up_hat[m] = num / cplx(a + half_l, -b);
        }

    grid_field u_new;
    u_new.n = n;
    dft(n, false, up_hat, u_new.values);
    const double inv_n2 = 1.0 / (static_cast<double>(n) * n);
    for (cplx& v : u_new.values) v *= inv_n2;

    // half-level Hamiltonians around the update; a jump past 10% means the
    // explicit nonlinearity outran the step size
    const double e_new = gradient_energy(up_hat, n) + potential_energy(u_new.values, n, s.params.eps);
    const double e_cur = gradient_energy(u0_hat, n) + potential_energy(s.u.values, n, s.params.eps);
    const double e_old = gradient_energy(um_hat, n) + potential_energy(s.u_prev.values, n, s.params.eps);
    const double h_old =
        half_level_kinetic(s.u.values, s.u_prev.values, n, mu_k, dt) + 0.5 * (e_cur + e_old);
    const double h_new =
        half_level_kinetic(u_new.values, s.u.values, n, mu_k, dt) + 0.5 * (e_new + e_cur);
    if (std::abs(h_new - h_old) > 0.1 * (std::abs(h_old) + 1.0))
        fail(errc::unstable_step, "step_nlsw: Hamiltonian jumped by more than 10% in one step");

    s.u_prev = std::move(s.u);
    s.u = std::move(u_new);
    s.t += dt;
}

double field_mass(const grid_field& u) {
    require_grid(u, "field_mass");
    double m = 0.0;
    for (const cplx& v : u.values) m += std::norm(v);
    return m / (static_cast<double>(u.n) * u.n);
}

double field_energy(const grid_field& u, double eps) {
    require_grid(u, "field_energy");
    if (!(eps > 0.0)) fail(errc::parameter, "field_energy: eps must be positive");
    std::vector<cplx> hat;
    dft(u.n, true, u.values, hat);
    return gradient_energy(hat, u.n) + potential_energy(u.values, u.n, eps);
}

double hamiltonian(const pde_state& s) {
    require_grid(s.u, "hamiltonian");
    require_time_params(s.params, "hamiltonian");
    if (s.params.mu == 0.0) return field_energy(s.u, s.params.eps);
    if (s.u_prev.n != s.u.n || s.u_prev.values.size() != s.u.values.size())
        fail(errc::config, "hamiltonian: previous level missing or mismatched");
    const double mu_k = s.params.mu * s.params.k_eps();
    return half_level_kinetic(s.u.values, s.u_prev.values, s.u.n, mu_k, s.params.dt) +
           0.5 * (field_energy(s.u, s.params.eps) + field_energy(s.u_prev, s.params.eps));
}

double tracked_vortices::min_pair_distance() const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < positions.size(); ++k)
        for (std::size_t l = k + 1; l < positions.size(); ++l)
            best = std::min(best, wrap_dist(positions[k], positions[l]));
    return best;
}

namespace {

// common zero of the bilinear interpolants of Re u and Im u on the unit cell;
// Newton from the center, center on breakdown or exit from the cell's halo
vec2 subcell_zero(cplx z00, cplx z10, cplx z01, cplx z11) {
    double xi = 0.5, eta = 0.5;
    for (int it = 0; it < 32; ++it) {
        const cplx bv = z00 * ((1 - xi) * (1 - eta)) + z10 * (xi * (1 - eta)) +
                        z01 * ((1 - xi) * eta) + z11 * (xi * eta);
        const cplx bx = (z10 - z00) * (1 - eta) + (z11 - z01) * eta;
        const cplx by = (z01 - z00) * (1 - xi) + (z11 - z10) * xi;
        const double det = bx.real() * by.imag() - by.real() * bx.imag();
        if (!(std::abs(det) > 1e-300)) break;
        const double dxi = (-bv.real() * by.imag() + by.real() * bv.imag()) / det;
        const double deta = (-bx.real() * bv.imag() + bv.real() * bx.imag()) / det;
        xi += dxi;
        eta += deta;
        if (!(xi > -1.0 && xi < 2.0 && eta > -1.0 && eta < 2.0)) {
            xi = eta = 0.5;
            break;
        }
        if (dxi * dxi + deta * deta < 1e-26) break;
    }
    if (!(xi >= -0.25 && xi <= 1.25 && eta >= -0.25 && eta <= 1.25)) {
        xi = 0.5;
        eta = 0.5;
    }
    return {std::clamp(xi, 0.0, 1.0), std::clamp(eta, 0.0, 1.0)};
}

struct detection {
    vec2 position;
    int degree = 0;
};

std::vector<detection> scan_windings(const grid_field& u) {
    const int n = u.n;
    const double h = 1.0 / n;
    std::vector<double> theta(u.values.size());
    for (std::size_t m = 0; m < u.values.size(); ++m) theta[m] = std::arg(u.values[m]);
    const auto th = [&](int i, int j) {
        return theta[static_cast<std::size_t>(grid_field::wrap_index(i, n)) * n +
                     grid_field::wrap_index(j, n)];
    };
    const auto pd = [](double d) { return d - 2.0 * M_PI * std::floor(d / (2.0 * M_PI) + 0.5); };

    std::vector<detection> found;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double circ = pd(th(i + 1, j) - th(i, j)) + pd(th(i + 1, j + 1) - th(i + 1, j)) +
                                pd(th(i, j + 1) - th(i + 1, j + 1)) + pd(th(i, j) - th(i, j + 1));
            const int w = static_cast<int>(std::lround(circ / (2.0 * M_PI)));
            if (w == 0) continue;
            const vec2 z =
                subcell_zero(u.at(i, j), u.at(i + 1, j), u.at(i, j + 1), u.at(i + 1, j + 1));
            found.push_back({wrap_unit(vec2{(i + z.x) * h, (j + z.y) * h}), w});
        }
    return found;
}

}  // namespace

tracked_vortices track_vortices(const pde_state& s, const tracked_vortices& previous) {
    require_grid(s.u, "track_vortices");
    std::vector<detection> found = scan_windings(s.u);

    tracked_vortices out;
    out.t = s.t;
    if (previous.positions.empty()) {
        for (const detection& d : found) {
            out.positions.push_back(d.position);
            out.degrees.push_back(d.degree);
            out.lost.push_back(0);
        }
        return out;
    }
    if (previous.degrees.size() != previous.positions.size())
        fail(errc::parameter, "track_vortices: previous positions and degrees differ in size");

    // nearest-neighbor identity matching within 1/8 of the previous minimal
    // pairwise distance (half the configuration scale r = min separation);
    // greedy over globally sorted candidate pairs
    const double radius = std::min(0.125 * previous.min_pair_distance(), 0.25);
    struct candidate {
        double dist;
        std::size_t prev, det;
    };
    std::vector<candidate> cands;
    for (std::size_t p = 0; p < previous.positions.size(); ++p)
        for (std::size_t d = 0; d < found.size(); ++d) {
            if (found[d].degree != previous.degrees[p]) continue;
            const double dist = wrap_dist(previous.positions[p], found[d].position);
            if (dist <= radius) cands.push_back({dist, p, d});
        }
    std::sort(cands.begin(), cands.end(),
              [](const candidate& a, const candidate& b) { return a.dist < b.dist; });

    out.positions = previous.positions;
    out.degrees = previous.degrees;
    out.lost.assign(previous.positions.size(), 1);
    std::vector<char> det_used(found.size(), 0);
    for (const candidate& c : cands) {
        if (!out.lost[c.prev] || det_used[c.det]) continue;
        out.positions[c.prev] = found[c.det].position;
        out.lost[c.prev] = 0;
        det_used[c.det] = 1;
    }
    return out;
}

double max_wrapped_deviation(const std::vector<vec2>& a, const std::vector<vec2>& b) {
    if (a.size() != b.size())
        fail(errc::parameter, "max_wrapped_deviation: position lists differ in size");
    double dev = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) dev = std::max(dev, wrap_dist(a[j], b[j]));
    return dev;
}

const char* compare_end_name(compare_end e) {
    switch (e) {
        case compare_end::window_done: return "window-done";
        case compare_end::core_overlap: return "core-overlap";
    }
    return "unknown";
}

pde_compare_report run_pde_compare(const green_evaluator& green, int n, const sim_params& p,
                                   const trajectory& reduced) {
    require_time_params(p, "run_pde_compare");
    if (!(p.t_final >= 0.0)) fail(errc::parameter, "run_pde_compare: t_final must be nonnegative");
    if (reduced.samples.empty())
        fail(errc::parameter, "run_pde_compare: reduced trajectory is empty");
    const reduced_state& front = reduced.samples.front();
    if (front.t != 0.0)
        fail(errc::parameter, "run_pde_compare: reduced trajectory must start at t = 0");
    if (front.lifted.size() != reduced.degrees.size())
        fail(errc::parameter, "run_pde_compare: reduced trajectory is inconsistent");

    // Both sides of the comparison come from the trajectory itself: starting
    // positions and the reduced momentum lift q0, whose field-side current
    // integral is the rotation J q0.
    vortex_config cfg;
    cfg.degrees = reduced.degrees;
    for (const vec2& l : front.lifted) cfg.positions.push_back(wrap_unit(l));
    validate_config(cfg);
    const vec2 q = jrot(front.q0);

    const double t_red = reduced.samples.back().t;
    if (reduced.reason == termination::time_reached && t_red + 1e-12 < p.t_final)
        fail(errc::parameter, "run_pde_compare: reduced trajectory does not cover [0, t_final]");

    pde_compare_report rep;
    rep.reduced_truncated = t_red + 1e-12 < p.t_final;
    rep.dt_bound = p.mu > 0.0 ? pde_stable_dt(n, p.eps)
                              : std::min(pde_stable_dt(n, p.eps), nls_stable_dt(n));
    rep.dt_used = p.dt;
    const double t_window = std::min(p.t_final, t_red);
    const double overlap_cut = std::max(8.0 / n, 3.0 * p.eps);

    pde_state s = init_field(green, n, cfg, q, p);
    const double h0 = hamiltonian(s);

    tracked_vortices cur;
    cur.positions = cfg.positions;
    cur.degrees = cfg.degrees;
    cur.lost.assign(cfg.size(), 0);
    cur = track_vortices(s, cur);

    const auto record = [&](const reduced_state& sample, const tracked_vortices& tracked) {
        double dev = 0.0;
        for (std::size_t j = 0; j < tracked.positions.size(); ++j) {
            if (tracked.lost[j]) {
                ++rep.losses;
                continue;
            }
            dev = std::max(dev, wrap_dist(tracked.positions[j], wrap_unit(sample.lifted[j])));
        }
        rep.times.push_back(sample.t);
        rep.deviations.push_back(dev);
        rep.max_deviation = std::max(rep.max_deviation, dev);
        rep.compare_t = sample.t;
    };

    // The comparison is defined only while both descriptions still hold two
    // separated vortices: a reduced sample with pair separation below the
    // core diameter corresponds to no two-vortex field at this eps, so it is
    // excluded by the same threshold as the tracked side.
    const auto reduced_sep = [](const reduced_state& sample) {
        double sep = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a + 1 < sample.lifted.size(); ++a)
            for (std::size_t b = a + 1; b < sample.lifted.size(); ++b)
                sep = std::min(sep, wrap_dist(wrap_unit(sample.lifted[a]), wrap_unit(sample.lifted[b])));
        return sep;
    };

    if (reduced_sep(reduced.samples.front()) < overlap_cut ||
        cur.min_pair_distance() < overlap_cut) {
        rep.reason = compare_end::core_overlap;
        return rep;
    }
    record(reduced.samples.front(), cur);

    for (std::size_t k = 1; k < reduced.samples.size(); ++k) {
        const reduced_state& target = reduced.samples[k];
        if (target.t > t_window + 1e-12) break;
        if (reduced_sep(target) < overlap_cut) {
            rep.reason = compare_end::core_overlap;
            return rep;
        }
        const double span = target.t - reduced.samples[k - 1].t;
        if (!(span > 0.0))
            fail(errc::parameter, "run_pde_compare: reduced sample times must increase");

        const int m = std::max(1, static_cast<int>(std::ceil(span / rep.dt_bound - 1e-9)));
        double dt_k = span / m;
        if (std::abs(dt_k - s.params.dt) <= 1e-12 * dt_k) dt_k = s.params.dt;
        if (p.mu > 0.0 && dt_k != s.params.dt) {
            // re-space the previous level: u - r (u - u_prev) holds the same
            // velocity and curvature to O(dt^2) at the new spacing r dt
            const double r = dt_k / s.params.dt;
            for (std::size_t w = 0; w < s.u.values.size(); ++w)
                s.u_prev.values[w] = s.u.values[w] - r * (s.u.values[w] - s.u_prev.values[w]);
        }
        s.params.dt = dt_k;
        rep.dt_used = dt_k;
        for (int step = 0; step < m; ++step) {
            if (p.mu > 0.0)
                step_nlsw(s);
            else
                step_nls(s);
        }
        s.t = target.t;

        cur = track_vortices(s, cur);
        rep.hamiltonian_drift = std::max(
            rep.hamiltonian_drift, std::abs(hamiltonian(s) - h0) / (1.0 + std::abs(h0)));
        if (cur.min_pair_distance() < overlap_cut) {
            rep.reason = compare_end::core_overlap;
            return rep;
        }
        record(target, cur);
    }
    rep.reason = compare_end::window_done;
    return rep;
}

}  // namespace tvx
