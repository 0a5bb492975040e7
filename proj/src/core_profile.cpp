#include "tvx/core_profile.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tvx/errors.hpp"

namespace tvx {

namespace {

// two-point Gauss rule on the reference element [0,1]
constexpr double kGaussXi[2] = {0.5 - 0.28867513459481287, 0.5 + 0.28867513459481287};

std::vector<double> graded_mesh(int m) {
    std::vector<double> r(static_cast<std::size_t>(m) + 1);
    for (int i = 0; i <= m; ++i) {
        const double s = static_cast<double>(i) / m;
        r[static_cast<std::size_t>(i)] = s * s;
    }
    return r;
}

void check_params(const core_profile_params& p) {
    if (!(p.eps > 0.0) || !(p.eps < 1.0))
        fail(errc::parameter, "core profile eps must lie in (0, 1)");
    if (p.mesh_points < 50)
        fail(errc::parameter, "core profile mesh needs at least 50 points");
    if (p.mesh_points * std::sqrt(p.eps) < 10.0)
        fail(errc::parameter, "core profile mesh too coarse to resolve eps");
    if (!(p.grad_tol > 0.0)) fail(errc::parameter, "core profile tolerance must be positive");
}

// solves (tri)diagonal system in place; returns false on a nonpositive or
// vanishing pivot, which the Newton drivers treat as an indefinite Hessian
bool thomas_solve(std::vector<double> diag, const std::vector<double>& lower,
                  const std::vector<double>& upper, std::vector<double> rhs,
                  std::vector<double>& out, bool require_positive) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        if ((require_positive && diag[i - 1] <= 0.0) || diag[i - 1] == 0.0) return false;
        const double w = lower[i - 1] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    if ((require_positive && diag[n - 1] <= 0.0) || diag[n - 1] == 0.0) return false;
    out.resize(n);
    out[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) out[i] = (rhs[i] - upper[i] * out[i + 1]) / diag[i];
    return true;
}

// monotone cubic (Fritsch-Carlson) slope at one node; depends only on the
// two adjacent intervals, so it can be evaluated locally without global state
double pchip_slope(const std::vector<double>& x, const std::vector<double>& y, std::size_t i) {
    const std::size_t n = x.size();
    auto h = [&](std::size_t k) { return x[k + 1] - x[k]; };
    auto del = [&](std::size_t k) { return (y[k + 1] - y[k]) / h(k); };
    auto endpoint = [](double h0, double h1, double d0, double d1) {
        double s = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (s * d0 <= 0.0) return 0.0;
        if (d0 * d1 < 0.0 && std::abs(s) > 3 * std::abs(d0)) return 3 * d0;
        return s;
    };
    if (i == 0) return endpoint(h(0), h(1), del(0), del(1));
    if (i == n - 1) return endpoint(h(n - 2), h(n - 3), del(n - 2), del(n - 3));
    const double dm = del(i - 1), dp = del(i);
    if (dm * dp <= 0.0) return 0.0;
    const double w1 = 2 * h(i) + h(i - 1);
    const double w2 = h(i) + 2 * h(i - 1);
    return (w1 + w2) / (w1 / dm + w2 / dp);
}

struct assembled {
    std::vector<double> grad;   // interior gradient dE/df_i
    std::vector<double> diag;   // Hessian tridiagonal
    std::vector<double> off;    // super/sub diagonal (symmetric)
};

// gradient and Hessian of the discrete energy with respect to the interior
// nodal values; element integrals use the same Gauss rule as profile_energy
void assemble_energy_system(const std::vector<double>& r, const std::vector<double>& f,
                            double eps, assembled& sys) {
    const std::size_t m = r.size() - 1;
    const double ie2 = 1.0 / (eps * eps);
    sys.grad.assign(m - 1, 0.0);
    sys.diag.assign(m - 1, 0.0);
    sys.off.assign(m - 2, 0.0);
    for (std::size_t e = 0; e < m; ++e) {
        const double h = r[e + 1] - r[e];
        const double s = (f[e + 1] - f[e]) / h;
        for (double xi : kGaussXi) {
            const double rg = r[e] + h * xi;
            const double fg = f[e] * (1 - xi) + f[e + 1] * xi;
            const double w = M_PI * h * rg;  // 2*pi * h * (gauss weight 1/2) * r
            const double pot1 = -fg * (1 - fg * fg) * ie2;   // d/df of potential
            const double pot2 = (3 * fg * fg - 1) * ie2;     // second derivative
            const double ga = w * (-s / h + fg * (1 - xi) / (rg * rg) + pot1 * (1 - xi));
            const double gb = w * (s / h + fg * xi / (rg * rg) + pot1 * xi);
            const double haa = w * (1 / (h * h) + ((1 - xi) * (1 - xi)) * (1 / (rg * rg) + pot2));
            const double hbb = w * (1 / (h * h) + (xi * xi) * (1 / (rg * rg) + pot2));
            const double hab = w * (-1 / (h * h) + xi * (1 - xi) * (1 / (rg * rg) + pot2));
            if (e > 0) {
                sys.grad[e - 1] += ga;
                sys.diag[e - 1] += haa;
            }
            if (e + 1 < m) {
                sys.grad[e] += gb;
                sys.diag[e] += hbb;
            }
            if (e > 0 && e + 1 < m) sys.off[e - 1] += hab;
        }
    }
}

double norm2v(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

core_profile finish(const core_profile_params& p, std::vector<double> r, std::vector<double> f) {
    core_profile out;
    out.eps = p.eps;
    out.energy = profile_energy(r, f, p.eps);
    out.r = std::move(r);
    out.f = std::move(f);
    return out;
}

}  // namespace

double profile_energy(const std::vector<double>& r, const std::vector<double>& f, double eps) {
    if (r.size() != f.size() || r.size() < 2)
        fail(errc::parameter, "profile_energy needs matching node/value arrays");
    const double ie2 = 1.0 / (eps * eps);
    double sum = 0;
    for (std::size_t e = 0; e + 1 < r.size(); ++e) {
        const double h = r[e + 1] - r[e];
        const double s = (f[e + 1] - f[e]) / h;
        for (double xi : kGaussXi) {
            const double rg = r[e] + h * xi;
            const double fg = f[e] * (1 - xi) + f[e + 1] * xi;
            const double dens = 0.5 * (s * s + fg * fg / (rg * rg)) +
                                (1 - fg * fg) * (1 - fg * fg) * 0.25 * ie2;
            sum += M_PI * h * rg * dens;  // includes the 2*pi and gauss 1/2
        }
    }
    return sum;
}

double core_profile::gamma_estimate() const { return energy + M_PI * std::log(eps); }

double core_profile::value(double rr) const {
    if (rr <= 0.0) return 0.0;
    if (rr >= r.back()) return 1.0;
    const auto it = std::upper_bound(r.begin(), r.end(), rr);
    const std::size_t i = static_cast<std::size_t>(it - r.begin()) - 1;
    const double h = r[i + 1] - r[i];
    const double t = (rr - r[i]) / h;
    const double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
    const double h10 = t * (1 - t) * (1 - t);
    const double h01 = t * t * (3 - 2 * t);
    const double h11 = t * t * (t - 1);
    return f[i] * h00 + h * pchip_slope(r, f, i) * h10 + f[i + 1] * h01 +
           h * pchip_slope(r, f, i + 1) * h11;
}

core_profile minimize_profile_energy(const core_profile_params& p) {
    check_params(p);
    const std::size_t m = static_cast<std::size_t>(p.mesh_points);
    std::vector<double> r = graded_mesh(p.mesh_points);
    std::vector<double> f(m + 1);
    for (std::size_t i = 0; i <= m; ++i) f[i] = std::min(r[i] / p.eps, 1.0);

    assembled sys;
    std::vector<double> delta, trial(f);
    double lam = 0.0;
    for (int it = 0; it < p.max_iter; ++it) {
        assemble_energy_system(r, f, p.eps, sys);
        const double gnorm = norm2v(sys.grad);
        if (gnorm <= p.grad_tol) return finish(p, std::move(r), std::move(f));

        std::vector<double> rhs(sys.grad);
        for (double& x : rhs) x = -x;
        double scale = 0;
        for (double d : sys.diag) scale = std::max(scale, std::abs(d));
        for (;;) {
            std::vector<double> shifted(sys.diag);
            for (double& d : shifted) d += lam;
            double descent = 0;
            if (thomas_solve(shifted, sys.off, sys.off, rhs, delta, true)) {
                for (std::size_t i = 0; i < delta.size(); ++i) descent += sys.grad[i] * delta[i];
                if (descent < 0) break;
            }
            lam = (lam == 0.0) ? 1e-10 * scale : lam * 10;
            if (lam > 1e6 * scale)
                fail(errc::non_convergence, "core profile Hessian regularization failed");
        }

        const double e0 = profile_energy(r, f, p.eps);
        // In the terminal phase the true energy decrease per step drops below
        // the rounding of E itself and a decrease test would reject genuine
        // Newton steps.  With an SPD Hessian and a small gradient the pure
        // step is a contraction, so take it without consulting the energy.
        if (lam == 0.0 && gnorm <= 1e-6 * (1 + std::abs(e0))) {
            for (std::size_t i = 0; i + 2 < f.size(); ++i) f[i + 1] += delta[i];
            continue;
        }
        double t = 1.0;
        bool moved = false;
        for (int halve = 0; halve < 40; ++halve, t *= 0.5) {
            for (std::size_t i = 0; i + 2 < f.size(); ++i) trial[i + 1] = f[i + 1] + t * delta[i];
            if (profile_energy(r, trial, p.eps) <= e0) {
                f = trial;
                moved = true;
                break;
            }
        }
        if (!moved) {
            lam = (lam == 0.0) ? 1e-6 * scale : lam * 100;
            continue;
        }
        if (t == 1.0 && lam > 0) lam *= 0.1;
    }
    fail(errc::non_convergence, "core profile energy minimization did not reach tolerance");
}

core_profile solve_profile_ode(const core_profile_params& p) {
    check_params(p);
    const std::size_t m = static_cast<std::size_t>(p.mesh_points);
    std::vector<double> r = graded_mesh(p.mesh_points);
    std::vector<double> f(m + 1);
    for (std::size_t i = 0; i <= m; ++i) f[i] = std::min(r[i] / p.eps, 1.0);
    const double ie2 = 1.0 / (p.eps * p.eps);

    // nonuniform three-point coefficients and residual scales per interior node
    std::vector<double> cm(m - 1), c0(m - 1), cp(m - 1), scale(m - 1);
    for (std::size_t i = 1; i < m; ++i) {
        const double hm = r[i] - r[i - 1], hp = r[i + 1] - r[i], ri = r[i];
        cm[i - 1] = 2 / (hm * (hm + hp)) - hp / (hm * (hm + hp)) / ri;
        cp[i - 1] = 2 / (hp * (hm + hp)) + hm / (hp * (hm + hp)) / ri;
        c0[i - 1] = -2 / (hm * hp) + (hp - hm) / (hm * hp) / ri - 1 / (ri * ri);
        scale[i - 1] = 2 / (hm * hp) + 1 / (ri * ri) + ie2;
    }
    auto residual = [&](const std::vector<double>& g, std::vector<double>& out) {
        out.resize(m - 1);
        for (std::size_t i = 1; i < m; ++i)
            out[i - 1] = cm[i - 1] * g[i - 1] + c0[i - 1] * g[i] + cp[i - 1] * g[i + 1] +
                         (1 - g[i] * g[i]) * g[i] * ie2;
    };
    auto merit = [&](const std::vector<double>& res) {
        double s = 0;
        for (std::size_t i = 0; i < res.size(); ++i) {
            const double x = res[i] / scale[i];
            s += x * x;
        }
        return s;
    };

    std::vector<double> res, delta, trial(f), tres;
    residual(f, res);
    for (int it = 0; it < p.max_iter; ++it) {
        double worst = 0;
        for (std::size_t i = 0; i < res.size(); ++i)
            worst = std::max(worst, std::abs(res[i]) / scale[i]);
        if (worst <= p.grad_tol) return finish(p, std::move(r), std::move(f));

        std::vector<double> diag(m - 1), lower(m - 2), upper(m - 2), rhs(m - 1);
        for (std::size_t i = 0; i < m - 1; ++i) {
            diag[i] = c0[i] + (1 - 3 * f[i + 1] * f[i + 1]) * ie2;
            rhs[i] = -res[i];
            if (i + 1 < m - 1) {
                upper[i] = cp[i];
                lower[i] = cm[i + 1];
            }
        }
        if (!thomas_solve(diag, lower, upper, rhs, delta, false))
            fail(errc::non_convergence, "core profile collocation Jacobian is singular");

        const double m0 = merit(res);
        double t = 1.0;
        bool moved = false;
        for (int halve = 0; halve < 40; ++halve, t *= 0.5) {
            for (std::size_t i = 0; i + 2 < f.size(); ++i) trial[i + 1] = f[i + 1] + t * delta[i];
            residual(trial, tres);
            if (merit(tres) < m0) {
                f = trial;
                res = tres;
                moved = true;
                break;
            }
        }
        if (!moved) fail(errc::non_convergence, "core profile collocation line search stalled");
    }
    fail(errc::non_convergence, "core profile collocation did not reach tolerance");
}

}  // namespace tvx
