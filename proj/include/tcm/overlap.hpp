#pragma once

#include <memory>
#include <vector>

#include "tcm/activations.hpp"
#include "tcm/gaussian.hpp"

namespace tcm {

// Cubic interpolant on a uniform lattice with not-a-knot end conditions.
class CubicSpline {
  public:
    CubicSpline() = default;
    // ys[i] are the values at x0 + i*dx; needs at least 4 points.
    CubicSpline(double x0, double dx, std::vector<double> ys);
    // Evaluates the spline; x is clamped to the lattice range.
    double operator()(double x) const;

  private:
    double x0_ = 0.0;
    double dx_ = 1.0;
    std::vector<double> ys_;
    std::vector<double> d2_;  // second derivatives at the nodes
};

struct OverlapOptions {
    int outer_order = 80;   // quadrature order for the conditioning variable
    int inner_order = 80;   // quadrature order for the conditional mean
    int table_points = 2001;  // lattice size for the memoized fast path
    // When false, operator() always evaluates directly instead of through the
    // table.  The table's interpolation error (~1e-9) carries a p-derivative
    // of order error/spacing (~1e-5), which is enough to displace nearly
    // degenerate stationary points; derivative-hungry callers disable it.
    bool use_table = true;
};

// The normalized conditional-mean overlap of an activation:
//   rho(p) = E_h[ (E_g f(sqrt(1-p) g + sqrt(p) h))^2 ] / E[f'(g)^2],  p in [0,1].
// rho is nondecreasing with rho(0) = m1^2/dm2 and rho(1) = m2/dm2.
// Closed forms are used for "quadratic" and "erf"; "relu" integrates a
// closed-form conditional mean; everything else uses nested quadrature.
// Activations without a closed form get a spline table for operator().
class OverlapFunction {
  public:
    OverlapFunction(const ActivationSpec& act, const MomentSet& ms,
                    const OverlapOptions& opts = {});

    // Fast path: closed form where available, otherwise the spline table.
    double operator()(double p) const;

    // Table-free evaluation (closed form or quadrature at full accuracy).
    double direct(double p) const;

    double top() const { return top_; }        // rho(1) = m2/dm2
    double bottom() const { return bottom_; }  // rho(0) = m1^2/dm2
    const MomentSet& moments() const { return ms_; }

  private:
    enum class Mode { closed_quadratic, closed_erf, relu_semi, nested };

    double eval_quadrature(double p) const;

    const ActivationSpec* act_;
    MomentSet ms_;
    OverlapOptions opts_;
    Mode mode_;
    double top_ = 1.0;
    double bottom_ = 0.0;
    QuadratureGrid outer_grid_;
    QuadratureGrid inner_grid_;
    std::shared_ptr<const CubicSpline> table_;  // null for closed-form modes
};

// Effective field coefficients of an ordered overlap chain
// 1 = p_1 >= p_2 >= ... >= p_{r+1} = 0: coefficient k (k = 2..r+1) is
// sqrt(rho(p_{k-1}) - rho(p_k)).  Their squares telescope to rho(1) - rho(0).
// Tiny negative radicands (>= -1e-12) are clamped to 0; larger ones throw
// DomainError (unsorted input or a non-monotone curve).
std::vector<double> effective_coeffs(const OverlapFunction& rho,
                                     const std::vector<double>& p_chain);

}  // namespace tcm
