#include "tcm/overlap.hpp"

#include <cmath>

namespace tcm {

CubicSpline::CubicSpline(double x0, double dx, std::vector<double> ys)
    : x0_(x0), dx_(dx), ys_(std::move(ys)) {
    const std::size_t n = ys_.empty() ? 0 : ys_.size() - 1;  // number of intervals
    if (n < 3) throw ConfigError("CubicSpline: need at least 4 lattice points");
    if (!(dx_ > 0.0)) throw ConfigError("CubicSpline: lattice step must be positive");
    d2_.assign(n + 1, 0.0);

    // Second-derivative formulation on a uniform lattice.  Interior equations
    //   d2[i-1] + 4 d2[i] + d2[i+1] = r[i],  r[i] = 6 (y[i-1] - 2 y[i] + y[i+1]) / dx^2.
    // Not-a-knot makes d2 linear across the first and last interior node:
    //   d2[0] = 2 d2[1] - d2[2],  d2[n] = 2 d2[n-1] - d2[n-2],
    // which collapses the boundary equations to d2[1] = r[1]/6, d2[n-1] = r[n-1]/6.
    std::vector<double> r(n + 1, 0.0);
    const double inv_h2 = 1.0 / (dx_ * dx_);
    for (std::size_t i = 1; i < n; ++i)
        r[i] = 6.0 * (ys_[i - 1] - 2.0 * ys_[i] + ys_[i + 1]) * inv_h2;

    d2_[1] = r[1] / 6.0;
    d2_[n - 1] = r[n - 1] / 6.0;
    if (n >= 4) {
        // Solve the tridiagonal system for d2[2..n-2] with d2[1], d2[n-1] known.
        const std::size_t m = n - 3;  // unknown count
        std::vector<double> diag(m, 4.0), rhs(m, 0.0);
        for (std::size_t k = 0; k < m; ++k) rhs[k] = r[k + 2];
        rhs[0] -= d2_[1];
        rhs[m - 1] -= d2_[n - 1];
        for (std::size_t k = 1; k < m; ++k) {  // Thomas elimination, off-diagonals are 1
            const double w = 1.0 / diag[k - 1];
            diag[k] -= w;
            rhs[k] -= w * rhs[k - 1];
        }
        d2_[n - 2] = rhs[m - 1] / diag[m - 1];
        for (std::size_t k = m - 1; k-- > 0;)
            d2_[k + 2] = (rhs[k] - d2_[k + 3]) / diag[k];
    }
    d2_[0] = 2.0 * d2_[1] - d2_[2];
    d2_[n] = 2.0 * d2_[n - 1] - d2_[n - 2];
}

double CubicSpline::operator()(double x) const {
    const std::size_t n = ys_.size() - 1;
    double u = (x - x0_) / dx_;
    if (u < 0.0) u = 0.0;
    if (u > static_cast<double>(n)) u = static_cast<double>(n);
    std::size_t i = static_cast<std::size_t>(u);
    if (i >= n) i = n - 1;
    const double t = (x - (x0_ + static_cast<double>(i) * dx_));
    const double h = dx_;
    const double b = (ys_[i + 1] - ys_[i]) / h - h * (2.0 * d2_[i] + d2_[i + 1]) / 6.0;
    return ys_[i] + t * (b + t * (0.5 * d2_[i] + t * (d2_[i + 1] - d2_[i]) / (6.0 * h)));
}

namespace {

// E_g max(s*g + m, 0) for s >= 0: s*phi(m/s) + m*Phi(m/s); max(m, 0) when s = 0.
double relu_conditional_mean(double s, double m) {
    if (s <= 0.0) return m > 0.0 ? m : 0.0;
    const double a = m / s;
    return s * normal_pdf(a) + m * normal_cdf(a);
}

}  // namespace

OverlapFunction::OverlapFunction(const ActivationSpec& act, const MomentSet& ms,
                                 const OverlapOptions& opts)
    : act_(&act), ms_(ms), opts_(opts) {
    if (!(ms_.dm2 > 0.0))
        throw DomainError("overlap: E[f'(g)^2] must be positive");
    top_ = ms_.m2 / ms_.dm2;
    bottom_ = ms_.m1 * ms_.m1 / ms_.dm2;
    if (act.name == "quadratic") {
        mode_ = Mode::closed_quadratic;
    } else if (act.name == "erf") {
        mode_ = Mode::closed_erf;
    } else if (act.name == "relu") {
        mode_ = Mode::relu_semi;
    } else {
        mode_ = Mode::nested;
    }
    if (mode_ == Mode::relu_semi || mode_ == Mode::nested) {
        outer_grid_ = gauss_hermite(opts_.outer_order);
        if (mode_ == Mode::nested) inner_grid_ = gauss_hermite(opts_.inner_order);
        if (opts_.use_table) {
            const int np = opts_.table_points;
            if (np < 4) throw ConfigError("overlap: table_points must be at least 4");
            const double dx = 1.0 / static_cast<double>(np - 1);
            std::vector<double> ys(np);
            for (int i = 0; i < np; ++i)
                ys[i] = eval_quadrature(static_cast<double>(i) * dx);
            table_ = std::make_shared<const CubicSpline>(0.0, dx, std::move(ys));
        }
    }
}

double OverlapFunction::eval_quadrature(double p) const {
    if (p <= 0.0) return bottom_;
    if (p >= 1.0) return top_;
    const double s = std::sqrt(1.0 - p);
    const double rp = std::sqrt(p);
    if (mode_ == Mode::relu_semi) {
        const double second = expect1(
            [&](double h) {
                const double mean = relu_conditional_mean(s, rp * h);
                return mean * mean;
            },
            outer_grid_);
        return second / ms_.dm2;
    }
    // Nested quadrature: inner mean over g at fixed h, squared, averaged over h.
    const double second = expect1(
        [&](double h) {
            const double mean =
                expect1([&](double g) { return act_->value(s * g + rp * h); }, inner_grid_);
            return mean * mean;
        },
        outer_grid_);
    return second / ms_.dm2;
}

double OverlapFunction::direct(double p) const {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("overlap: argument must lie in [0, 1]");
    switch (mode_) {
        case Mode::closed_quadratic:
            // E_h[((1-p) + p h^2)^2] = 1 + 2 p^2; normalized by dm2 = 4.
            return (1.0 + 2.0 * p * p) / 4.0;
        case Mode::closed_erf: {
            // Inner mean erf(sqrt(p) h / sqrt(3 - 2p)); then
            // E erf(beta h)^2 = (2/pi) asin(2 beta^2 / (1 + 2 beta^2)).
            const double c2 = p / (3.0 - 2.0 * p);
            const double second = 0.6366197723675813431 * std::asin(2.0 * c2 / (1.0 + 2.0 * c2));
            return second / ms_.dm2;
        }
        case Mode::relu_semi:
        case Mode::nested:
            return eval_quadrature(p);
    }
    throw DomainError("overlap: unreachable mode");
}

std::vector<double> effective_coeffs(const OverlapFunction& rho,
                                     const std::vector<double>& p_chain) {
    if (p_chain.size() < 2 || p_chain.front() != 1.0 || p_chain.back() != 0.0)
        throw DomainError("effective_coeffs: chain must run from 1 down to 0");
    for (std::size_t i = 0; i + 1 < p_chain.size(); ++i)
        if (p_chain[i] < p_chain[i + 1])
            throw DomainError("effective_coeffs: chain must be sorted descending");
    std::vector<double> out;
    out.reserve(p_chain.size() - 1);
    double hi = rho(p_chain.front());
    for (std::size_t i = 1; i < p_chain.size(); ++i) {
        const double lo = rho(p_chain[i]);
        double rad = hi - lo;
        if (rad < 0.0) {
            if (rad < -1e-12)
                throw DomainError("effective_coeffs: overlap curve decreased along the chain");
            rad = 0.0;
        }
        out.push_back(std::sqrt(rad));
        hi = lo;
    }
    return out;
}

double OverlapFunction::operator()(double p) const {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("overlap: argument must lie in [0, 1]");
    switch (mode_) {
        case Mode::closed_quadratic:
        case Mode::closed_erf:
            return direct(p);
        case Mode::relu_semi:
        case Mode::nested:
            if (p <= 0.0) return bottom_;
            if (p >= 1.0) return top_;
            return (*table_)(p);
    }
    throw DomainError("overlap: unreachable mode");
}

}  // namespace tcm
