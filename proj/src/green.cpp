#include "tvx/green.hpp"

#include "tvx/errors.hpp"

#include <cmath>
#include <vector>

/* Ewald split of the torus Green function.  Starting from the Fourier series
 *
 *     F(p) = -(1/2pi) sum_{k != 0} e^{2 pi i k.p} / |k|^2,
 *
 * write 1/|k|^2 = int_0^s0 e^{-s|k|^2} ds + int_{s0}^inf e^{-s|k|^2} ds.  The
 * tail integral keeps the Fourier form with a Gaussian damping e^{-s0 |k|^2};
 * Poisson summation turns the near integral into a lattice-image sum of
 * exponential integrals.  With a = pi^2 / s0:
 *
 *     F(p) = s0/(2 pi) - (1/2) sum_{n in Z^2} E1(a |p+n|^2)
 *            - (1/2 pi) sum_{k != 0} cos(2 pi k.p) e^{-s0 |k|^2} / |k|^2.
 *
 * The n = 0 term carries the log singularity: -E1(a r^2)/2 = log r
 * + (gamma_E + log a)/2 - Ein(a r^2)/2, which gives a cancellation-free form
 * for the regular part.  Both sums converge like Gaussians, so cutoff 1 in
 * real space and ~15 per dimension in reciprocal space reach 1e-10.
 */

namespace tvx {

namespace detail {

double exp_int_e1(double x) {
    if (!(x > 0.0)) fail(errc::parameter, "exp_int_e1 requires x > 0");
    return -std::expint(-x);
}

double exp_int_ein(double z) {
    if (z < 0.0) fail(errc::parameter, "exp_int_ein requires z >= 0");
    if (z > 2.0) return euler_gamma + std::log(z) + exp_int_e1(z);
    double term = z, sum = z;  // m = 1
    for (int m = 2; m <= 40; ++m) {
        term *= -z / m;
        double add = term / m;
        sum += add;
        if (std::abs(add) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
}

}  // namespace detail

struct green_evaluator::trig_table {
    // cos/sin(2 pi k t) for k = 0..K, K <= 48.
    std::array<double, 49> c, s;
    void fill(int K, double t) {
        double c1 = std::cos(2.0 * M_PI * t), s1 = std::sin(2.0 * M_PI * t);
        c[0] = 1.0;
        s[0] = 0.0;
        for (int k = 1; k <= K; ++k) {
            c[k] = c[k - 1] * c1 - s[k - 1] * s1;
            s[k] = s[k - 1] * c1 + c[k - 1] * s1;
        }
    }
};

green_evaluator::green_evaluator(const green_params& params) : params_(params) {
    if (!(params_.split > 0.0) || params_.split > 1.0)
        fail(errc::parameter, "green split parameter must lie in (0, 1]");
    if (params_.fourier_cutoff < 1 || params_.fourier_cutoff > 48)
        fail(errc::parameter, "green fourier_cutoff must lie in [1, 48]");
    if (params_.image_cutoff < 1 || params_.image_cutoff > 4)
        fail(errc::parameter, "green image_cutoff must lie in [1, 4]");
    if (!(params_.target_abs_error > 0.0))
        fail(errc::parameter, "green target_abs_error must be positive");

    a_ = M_PI * M_PI / params_.split;

    // Truncation bounds.  Reciprocal tail (outside the disk |k| <= K, which the
    // box contains): integral comparison gives E1(split K^2)/2 for the value
    // and pi^(1/2) erfc-type decay for the gradient; real-space tail: the first
    // omitted image shell sits at distance >= image_cutoff + 1/2.
    double K = params_.fourier_cutoff;
    double tail_k = 0.5 * detail::exp_int_e1(params_.split * K * K);
    double tail_k_grad = M_PI * std::sqrt(M_PI / params_.split) *
                         std::erfc(std::sqrt(params_.split) * K);
    double rmin = params_.image_cutoff + 0.5;
    double shell = 8.0 * (params_.image_cutoff + 1);
    double tail_r = shell * detail::exp_int_e1(a_ * rmin * rmin);
    double tail_r_grad = shell * std::exp(-a_ * rmin * rmin) / rmin;
    bound_ = 2.0 * std::max(tail_k + tail_r, tail_k_grad + tail_r_grad);
    if (bound_ > params_.target_abs_error)
        fail(errc::parameter, "green cutoffs cannot meet target_abs_error");
}

double green_evaluator::recip_value(vec2 p) const {
    const int K = params_.fourier_cutoff;
    trig_table tx, ty;
    tx.fill(K, p.x);
    ty.fill(K, p.y);
    double sum = 0.0;
    for (int k1 = -K; k1 <= K; ++k1) {
        double c1 = tx.c[std::abs(k1)];
        double s1 = (k1 < 0 ? -1.0 : 1.0) * tx.s[std::abs(k1)];
        for (int k2 = -K; k2 <= K; ++k2) {
            if (k1 == 0 && k2 == 0) continue;
            double c2 = ty.c[std::abs(k2)];
            double s2 = (k2 < 0 ? -1.0 : 1.0) * ty.s[std::abs(k2)];
            double k2n = double(k1) * k1 + double(k2) * k2;
            sum += (c1 * c2 - s1 * s2) * std::exp(-params_.split * k2n) / k2n;
        }
    }
    return -sum / (2.0 * M_PI);
}

vec2 green_evaluator::recip_grad(vec2 p) const {
    const int K = params_.fourier_cutoff;
    trig_table tx, ty;
    tx.fill(K, p.x);
    ty.fill(K, p.y);
    vec2 g{0.0, 0.0};
    for (int k1 = -K; k1 <= K; ++k1) {
        double c1 = tx.c[std::abs(k1)];
        double s1 = (k1 < 0 ? -1.0 : 1.0) * tx.s[std::abs(k1)];
        for (int k2 = -K; k2 <= K; ++k2) {
            if (k1 == 0 && k2 == 0) continue;
            double c2 = ty.c[std::abs(k2)];
            double s2 = (k2 < 0 ? -1.0 : 1.0) * ty.s[std::abs(k2)];
            double k2n = double(k1) * k1 + double(k2) * k2;
            double w = (s1 * c2 + c1 * s2) * std::exp(-params_.split * k2n) / k2n;
            g.x += k1 * w;
            g.y += k2 * w;
        }
    }
    return g;
}

double green_evaluator::eval(vec2 p) const {
    vec2 w = wrap_sym(p);
    if (norm2(w) < 1e-24) fail(errc::singular_point, "green_eval at a lattice point");
    const int c = params_.image_cutoff;
    double sum = params_.split / (2.0 * M_PI);
    for (int n1 = -c; n1 <= c; ++n1)
        for (int n2 = -c; n2 <= c; ++n2) {
            vec2 z{w.x + n1, w.y + n2};
            sum -= 0.5 * detail::exp_int_e1(a_ * norm2(z));
        }
    return sum + recip_value(w);
}

vec2 green_evaluator::grad(vec2 p) const {
    vec2 w = wrap_sym(p);
    if (norm2(w) < 1e-24) fail(errc::singular_point, "green_grad at a lattice point");
    const int c = params_.image_cutoff;
    vec2 g{0.0, 0.0};
    for (int n1 = -c; n1 <= c; ++n1)
        for (int n2 = -c; n2 <= c; ++n2) {
            vec2 z{w.x + n1, w.y + n2};
            double r2 = norm2(z);
            g += z * (std::exp(-a_ * r2) / r2);
        }
    return g + recip_grad(w);
}

double green_evaluator::reg(vec2 p) const {
    vec2 w = wrap_sym(p);
    double r2 = norm2(w);
    // -E1(a r^2)/2 - log r, evaluated without cancellation on both branches.
    double z = a_ * r2;
    double bracket;
    if (z <= 2.0)
        bracket = 0.5 * (detail::euler_gamma + std::log(a_)) - 0.5 * detail::exp_int_ein(z);
    else
        bracket = -0.5 * std::log(r2) - 0.5 * detail::exp_int_e1(z);
    const int c = params_.image_cutoff;
    double sum = bracket + params_.split / (2.0 * M_PI);
    for (int n1 = -c; n1 <= c; ++n1)
        for (int n2 = -c; n2 <= c; ++n2) {
            if (n1 == 0 && n2 == 0) continue;
            vec2 zv{w.x + n1, w.y + n2};
            sum -= 0.5 * detail::exp_int_e1(a_ * norm2(zv));
        }
    return sum + recip_value(w);
}

vec2 green_evaluator::reg_grad(vec2 p) const {
    vec2 w = wrap_sym(p);
    double r2 = norm2(w);
    // at a lattice point every term cancels by symmetry; return the exact limit
    if (r2 < 1e-24) return {0.0, 0.0};
    // n = 0 image minus the log gradient: w/r^2 * (e^{-a r^2} - 1), which
    // expm1 keeps accurate down to r = 0 where the limit is the zero vector.
    vec2 g = w * (std::expm1(-a_ * r2) / r2);
    const int c = params_.image_cutoff;
    for (int n1 = -c; n1 <= c; ++n1)
        for (int n2 = -c; n2 <= c; ++n2) {
            if (n1 == 0 && n2 == 0) continue;
            vec2 z{w.x + n1, w.y + n2};
            double rr = norm2(z);
            g += z * (std::exp(-a_ * rr) / rr);
        }
    return g + recip_grad(w);
}

}  // namespace tvx
