#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tcm/gaussian.hpp"

namespace tcm {

// Standard-Gaussian moments of an activation f:
//   m1 = E f(g), m2 = E f(g)^2, dm2 = E f'(g)^2.
struct MomentSet {
    double m1 = 0.0;
    double m2 = 0.0;
    double dm2 = 0.0;
};

// A pointwise activation with its a.e. derivative.  `kinks` lists the points
// where f or f' is non-smooth so quadrature can split there.
struct ActivationSpec {
    std::string name;
    std::function<double(double)> value;
    std::function<double(double)> derivative;
    std::optional<MomentSet> closed_form_moments;
    std::vector<double> kinks;
};

double eval(const ActivationSpec& act, double x);
double deriv(const ActivationSpec& act, double x);

// Moments via closed forms when present, otherwise quadrature with an
// internal grid-doubling consistency check (ConvergenceError beyond 1e-7).
MomentSet moments(const ActivationSpec& act, const QuadratureGrid& grid);

// Always-quadrature path (used for custom activations and verification).
MomentSet moments_by_quadrature(const ActivationSpec& act, const QuadratureGrid& grid);

// Builtin activations: "relu" | "quadratic" | "erf" | "tanh".
// Throws ConfigError for unknown ids.
const ActivationSpec& activation_by_id(std::string_view id);

const std::vector<std::string>& builtin_activation_ids();

}  // namespace tcm
