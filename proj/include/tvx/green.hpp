#pragma once

#include "tvx/torus.hpp"

#include <array>

namespace tvx {

// Green function F of the Laplacian on the unit torus, normalized by
//
//     Delta F = 2*pi*(delta_0 - 1),   integral of F over T^2 = 0,
//
// so F(p) = log|p| + O(1) near the origin.  Evaluation uses an Ewald split
// between a Gaussian-damped Fourier sum and a short-ranged lattice-image sum;
// both cutoffs are small because the split parameter balances the two tails.
struct green_params {
    double split = 0.15;          // Gaussian split parameter (time split of the heat kernel)
    int fourier_cutoff = 15;      // reciprocal sum over the box [-K, K]^2 \ {0}
    int image_cutoff = 1;         // real-space images n in [-cut, cut]^2
    double target_abs_error = 1e-10;
};

class green_evaluator {
  public:
    // ParameterError if the cutoffs cannot meet target_abs_error.
    explicit green_evaluator(const green_params& params = {});

    // F(p).  SingularPoint if the wrap distance to the lattice is < 1e-12.
    double eval(vec2 p) const;

    // grad F(p).  Same singularity guard as eval.
    vec2 grad(vec2 p) const;

    // Regular part F(p) - log|wrap(p)|, smooth through the origin; its value at
    // p = 0 is the Robin constant of the torus.
    double reg(vec2 p) const;

    // grad of the regular part; exactly (0,0) at p = 0.
    vec2 reg_grad(vec2 p) const;

    // Rigorous truncation bound for eval/grad at wrap distance >= 1e-6.
    double error_bound() const { return bound_; }

    const green_params& params() const { return params_; }

  private:
    struct trig_table;  // per-call cos/sin tables for the reciprocal sums

    double recip_value(vec2 p) const;
    vec2 recip_grad(vec2 p) const;

    green_params params_;
    double a_;       // pi^2 / split: real-space Gaussian exponent
    double bound_;   // validated truncation bound
};

namespace detail {
// Exponential integral E_1(x) = int_x^inf e^-t / t dt, x > 0.
double exp_int_e1(double x);
// Entire part Ein(z) = gamma_E + log z + E_1(z) = sum_{m>=1} (-1)^{m+1} z^m / (m * m!).
double exp_int_ein(double z);
inline constexpr double euler_gamma = 0.57721566490153286;
}  // namespace detail

}  // namespace tvx
