#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "tcm/errors.hpp"

namespace tcm {

// Quadrature rule for expectations over the standard normal: sum(w) == 1 and
// sum(w_i * f(x_i)) approximates E[f(g)], g ~ N(0,1).
struct QuadratureGrid {
    int order = 0;
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Probabilists' Gauss-Hermite rule with weights normalized to sum to 1.
// Valid orders: 2..512.  Results are cached; returned by value.
QuadratureGrid gauss_hermite(int order);

// Gauss-Legendre panel on [a, b] with the standard-normal density folded into
// the weights: sum(w_i * f(x_i)) approximates the integral of f(x) phi(x) over
// [a, b].  Building block for kink-split expectations.
QuadratureGrid gauss_legendre_panel(int order, double a, double b);

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) * 0.3989422804014326779;
}

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

// Compensated (Neumaier) summation; result independent of term magnitudes'
// cancellation pattern to ~1 ulp of the true sum.
class NeumaierSum {
  public:
    void add(double v) {
        double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// E[fn(g)] on the given grid.  Throws DomainError on a non-finite fn value.
template <class F>
double expect1(F&& fn, const QuadratureGrid& grid) {
    NeumaierSum acc;
    for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
        double v = fn(grid.nodes[i]);
        if (!std::isfinite(v)) throw DomainError("expect1: non-finite integrand value");
        acc.add(grid.weights[i] * v);
    }
    return acc.value();
}

/// Nested expectation: outer over y, inner over x,
//   sum_j w_j * reducer( sum_i w_i * inner(x_i, y_j) ).
// Throws DomainError on non-finite intermediates (e.g. log of a non-positive
// inner sum surfaces here as NaN).
template <class Inner, class Reducer>
double expect2_nested(Inner&& inner, Reducer&& reducer, const QuadratureGrid& grid) {
    NeumaierSum outer;
    for (std::size_t j = 0; j < grid.nodes.size(); ++j) {
        NeumaierSum in;
        for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
            double v = inner(grid.nodes[i], grid.nodes[j]);
            if (!std::isfinite(v)) throw DomainError("expect2_nested: non-finite inner value");
            in.add(grid.weights[i] * v);
        }
        double red = reducer(in.value());
        if (!std::isfinite(red)) throw DomainError("expect2_nested: non-finite reducer value");
        outer.add(grid.weights[j] * red);
    }
    return outer.value();
}

/// E[fn(g)] for fn with kinks (points where fn or its derivatives jump): the
// real line is cut at the kinks and each piece integrated by a mapped
// Gauss-Legendre panel, restoring spectral convergence.  The effective range
// is clipped to [-12, 12]; mass outside is below 2e-33.
template <class F>
double expect_piecewise(F&& fn, const std::vector<double>& kinks, int order) {
    constexpr double kRange = 12.0;
    std::vector<double> cuts;
    cuts.push_back(-kRange);
    for (double k : kinks)
        if (k > -kRange && k < kRange) cuts.push_back(k);
    cuts.push_back(kRange);
    std::sort(cuts.begin(), cuts.end());
    NeumaierSum acc;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        if (cuts[s + 1] - cuts[s] < 1e-300) continue;
        QuadratureGrid panel = gauss_legendre_panel(order, cuts[s], cuts[s + 1]);
        for (std::size_t i = 0; i < panel.nodes.size(); ++i) {
            double v = fn(panel.nodes[i]);
            if (!std::isfinite(v)) throw DomainError("expect_piecewise: non-finite integrand value");
            acc.add(panel.weights[i] * v);
        }
    }
    return acc.value();
}

// E_{g~N(0,1)}[erf(a*g + b)] = erf(b / sqrt(1 + 2 a^2)).
inline double erf_mean_identity(double a, double b) {
    return std::erf(b / std::sqrt(1.0 + 2.0 * a * a));
}

}  // namespace tcm
