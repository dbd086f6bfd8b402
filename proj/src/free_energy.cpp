#include "tcm/free_energy.hpp"

#include <cmath>
#include <limits>

namespace tcm {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;

enum class ExponentPattern { all_zero, all_positive };

ExponentPattern classify_exponents(const std::vector<double>& c) {
    bool any_zero = false, any_pos = false, any_neg = false;
    for (double v : c) {
        if (v == 0.0)
            any_zero = true;
        else if (v > 0.0)
            any_pos = true;
        else
            any_neg = true;
    }
    if (any_neg) throw DomainError("layer exponents must be nonnegative");
    if (any_zero && any_pos)
        throw DomainError("layer exponents must be all zero or all positive");
    return any_pos ? ExponentPattern::all_positive : ExponentPattern::all_zero;
}

void check_shape(const LiftParams& lp) {
    if (lp.q.size() != lp.p.size() || lp.c.size() != lp.p.size())
        throw DomainError("lift parameters p, q, c must have equal lengths");
    if (!(lp.gamma_sq > 0.0) || !(lp.gamma_sq_p > 0.0))
        throw DomainError("penalty parameters must be positive");
}

void check_ordering(const std::vector<double>& v, const char* what) {
    double prev = 1.0;
    for (double x : v) {
        if (!(x >= 0.0 && x <= prev))
            throw DomainError(std::string("overlap sequence ") + what +
                              " must descend within [0, 1]");
        prev = x;
    }
}

}  // namespace

FztInputs make_fzt_inputs(double B, double gap, double C) {
    FztInputs in;
    in.B = B;
    in.gap = gap;
    in.C = C;
    in.h_eff = gap > 0.0 ? -C / std::sqrt(gap) : 0.0;
    return in;
}

double fzt_kernel(const FztInputs& in) {
    if (in.B < 0.0) throw DomainError("fzt_kernel: B must be nonnegative");
    if (in.gap < 0.0) throw DomainError("fzt_kernel: gap must be nonnegative");
    if (in.B == 0.0) return 1.0;
    if (in.gap == 0.0) {
        const double t = in.C > 0.0 ? in.C : 0.0;
        return std::exp(-in.B * t * t);
    }
    const double a = 2.0 * in.gap * in.B + 1.0;
    const double h = in.h_eff;
    const double down = std::exp(-in.B * in.C * in.C / a) / (2.0 * std::sqrt(a)) *
                        std::erfc(h / std::sqrt(2.0 * a));
    const double up = 0.5 * std::erfc(-h * kInvSqrt2);
    return down + up;
}

double log_fzt_kernel(const FztInputs& in) {
    if (in.B < 0.0) throw DomainError("log_fzt_kernel: B must be nonnegative");
    if (in.gap < 0.0) throw DomainError("log_fzt_kernel: gap must be nonnegative");
    if (in.B == 0.0) return 0.0;
    if (in.gap == 0.0) {
        const double t = in.C > 0.0 ? in.C : 0.0;
        return -in.B * t * t;
    }
    const double v = fzt_kernel(in);
    if (v > 1e-280) return std::log(v);
    // Deep decay: C >> 0, so the thresholded branch dominates and its erfc
    // factor saturates at 2; evaluate its logarithm directly.
    const double a = 2.0 * in.gap * in.B + 1.0;
    return -in.B * in.C * in.C / a - 0.5 * std::log(a) +
           std::log(0.5 * std::erfc(in.h_eff / std::sqrt(2.0 * a)));
}

double z_infinity(const MomentSet& ms) {
    if (!(ms.dm2 > 0.0)) throw DomainError("z_infinity: E[f'(g)^2] must be positive");
    return (ms.m2 - ms.m1 * ms.m1) / (2.0 * ms.dm2);
}

double psi_level1(double alpha, const MomentSet& ms) {
    if (!(alpha > 0.0)) throw DomainError("psi_level1: alpha must be positive");
    return -1.0 + std::sqrt(alpha * z_infinity(ms));
}

double sphere_term(const LiftParams& lp) {
    check_shape(lp);
    const std::size_t n = lp.q.size();
    const double gp = lp.gamma_sq_p;
    if (n == 0 || classify_exponents(lp.c) == ExponentPattern::all_zero)
        return gp + 1.0 / (4.0 * gp);
    double theta_prev = 2.0 * gp;
    double q_prev = 1.0;
    double acc = gp;
    double theta = theta_prev;
    for (std::size_t k = 0; k < n; ++k) {
        theta = theta_prev - lp.c[k] * (q_prev - lp.q[k]);
        if (!(theta > 0.0))
            throw DomainError("sphere_term: recursion left the admissible region (Theta <= 0)");
        acc -= std::log(theta / theta_prev) / (2.0 * lp.c[k]);
        theta_prev = theta;
        q_prev = lp.q[k];
    }
    return acc + q_prev / (2.0 * theta);
}

namespace {

// Nested powered means of the kernel, fully in log space.
struct NetEvaluator {
    double B;
    double gap;
    const std::vector<double>& bb;      // bb[k-2] = effective coefficient k, k = 2..r+1
    const std::vector<double>& ratios;  // ratios[m-3] = c_m / c_{m-1}, m = 3..r
    const QuadratureGrid& grid;
    std::vector<double> log_w;

    double log_nested(int m, double S) const {
        if (m == 2) return log_fzt_kernel(make_fzt_inputs(B, gap, S));
        const double bm = bb[static_cast<std::size_t>(m) - 2];
        const double ratio = ratios[static_cast<std::size_t>(m) - 3];
        const std::size_t n = grid.nodes.size();
        std::vector<double> vals(n);
        double vmax = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            vals[i] = log_w[i] + ratio * log_nested(m - 1, S + bm * grid.nodes[i]);
            if (vals[i] > vmax) vmax = vals[i];
        }
        NeumaierSum acc;
        for (std::size_t i = 0; i < n; ++i) acc.add(std::exp(vals[i] - vmax));
        return vmax + std::log(acc.value());
    }
};

}  // namespace

double net_term(const LiftParams& lp, const OverlapFunction& rho, double alpha,
                const QuadratureGrid& grid) {
    check_shape(lp);
    if (!(alpha > 0.0)) throw DomainError("net_term: alpha must be positive");
    const int r = lp.level();
    const double zinf = 0.5 * (rho.top() - rho.bottom());
    if (r == 1 || classify_exponents(lp.c) == ExponentPattern::all_zero)
        return lp.gamma_sq + alpha * zinf / (4.0 * lp.gamma_sq);
    if (r > 4)
        throw ConfigError("net_term: nested quadrature supports level <= 4");

    std::vector<double> chain;
    chain.reserve(lp.p.size() + 2);
    chain.push_back(1.0);
    chain.insert(chain.end(), lp.p.begin(), lp.p.end());
    chain.push_back(0.0);
    const std::vector<double> bb = effective_coeffs(rho, chain);

    std::vector<double> ratios;
    for (std::size_t k = 1; k < lp.c.size(); ++k) ratios.push_back(lp.c[k] / lp.c[k - 1]);

    NetEvaluator ev{lp.c.front() / (4.0 * lp.gamma_sq), bb.front() * bb.front(), bb, ratios,
                    grid, {}};
    ev.log_w.resize(grid.weights.size());
    for (std::size_t i = 0; i < grid.weights.size(); ++i)
        ev.log_w[i] = std::log(grid.weights[i]);

    const double b_top = bb.back();
    NeumaierSum acc;
    for (std::size_t j = 0; j < grid.nodes.size(); ++j) {
        const double v = ev.log_nested(r, b_top * grid.nodes[j]);
        if (!std::isfinite(v)) throw DomainError("net_term: non-finite nested value");
        acc.add(grid.weights[j] * v);
    }
    return lp.gamma_sq - alpha / lp.c.back() * acc.value();
}

double psi(const LiftParams& lp, const OverlapFunction& rho, double alpha,
           const QuadratureGrid& grid) {
    check_shape(lp);
    check_ordering(lp.p, "p");
    check_ordering(lp.q, "q");
    double coupling = 0.0;
    double pq_prev = 1.0;
    for (std::size_t k = 0; k < lp.c.size(); ++k) {
        const double pq = lp.p[k] * lp.q[k];
        coupling += 0.5 * (pq_prev - pq) * lp.c[k];
        pq_prev = pq;
    }
    return coupling - sphere_term(lp) + net_term(lp, rho, alpha, grid);
}

}  // namespace tcm
