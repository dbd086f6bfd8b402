#include "tcm/oracle.hpp"

#include <cmath>

#include "tcm/gaussian.hpp"

namespace tcm {

namespace {

constexpr double kTwoPi = 6.2831853071795864769;

void validate(const McConfig& cfg) {
    if (cfg.d <= 0 || cfg.d % 2 != 0)
        throw ConfigError("oracle: dimension d must be even and positive");
    if (cfg.samples <= 0) throw ConfigError("oracle: sample count must be positive");
}

// Signed output sum f(x)^T w for w = [-1 (d/2); +1 (d/2)].
double signed_sum(const ActivationSpec& act, const std::vector<double>& x) {
    const std::size_t half = x.size() / 2;
    NeumaierSum s;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double v = act.value(x[j]);
        s.add(j < half ? -v : v);
    }
    return s.value();
}

struct SampleResult {
    double z = 0.0;
    bool fallback = false;  // candidate feasibility could not be certified
    bool polished = false;  // nu had to be rescaled beyond the first-order value
};

SampleResult sample_z1_impl(const ActivationSpec& act, const std::vector<double>& g,
                            bool polish) {
    const std::size_t d = g.size();
    const std::size_t half = d / 2;
    SampleResult out;

    const double s0 = signed_sum(act, g);
    if (s0 >= 0.0) return out;  // already feasible: z = 0

    std::vector<double> fp(d);
    NeumaierSum n2sum;
    for (std::size_t j = 0; j < d; ++j) {
        fp[j] = act.derivative(g[j]);
        n2sum.add(fp[j] * fp[j]);
    }
    const double n2 = n2sum.value();
    if (!(n2 > 0.0)) {
        out.fallback = true;  // degenerate gradient: no first-order move exists
        return out;
    }
    const double nu0 = -s0 / n2;

    auto value_at = [&](double nu) {
        NeumaierSum acc;
        for (std::size_t j = 0; j < d; ++j) {
            const double move = nu * fp[j] * (j < half ? -1.0 : 1.0);
            acc.add(move * move);
        }
        return acc.value();
    };
    auto feasible_at = [&](double nu) {
        std::vector<double> q(d);
        for (std::size_t j = 0; j < d; ++j)
            q[j] = g[j] + nu * fp[j] * (j < half ? -1.0 : 1.0);
        return signed_sum(act, q) >= 0.0;
    };

    if (!polish) {
        out.z = value_at(nu0);
        return out;
    }
    if (feasible_at(nu0)) {
        out.z = value_at(nu0);
        return out;
    }
    // The candidate undershoots; grow nu until feasible, then bisect down.
    out.polished = true;
    double lo = nu0, hi = nu0;
    bool found = false;
    for (int k = 0; k < 60; ++k) {
        hi *= 2.0;
        if (feasible_at(hi)) {
            found = true;
            break;
        }
        lo = hi;
    }
    if (!found) {
        out.fallback = true;  // report the first-order value, flagged
        out.z = value_at(nu0);
        return out;
    }
    for (int k = 0; k < 60 && (hi - lo) > 1e-12 * hi; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (feasible_at(mid))
            hi = mid;
        else
            lo = mid;
    }
    out.z = value_at(hi);
    return out;
}

}  // namespace

double NormalStream::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // 53-bit uniforms; u1 shifted into (0, 1] so the log is finite.
    const double u1 =
        1.0 - static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    has_spare_ = true;
    return r * std::cos(kTwoPi * u2);
}

double sample_z1(const ActivationSpec& act, std::int64_t d, const std::vector<double>& g,
                 bool polish) {
    if (d <= 0 || d % 2 != 0)
        throw ConfigError("sample_z1: dimension d must be even and positive");
    if (static_cast<std::size_t>(d) != g.size())
        throw ConfigError("sample_z1: vector length does not match d");
    return sample_z1_impl(act, g, polish).z;
}

McEstimate mc_estimate(const ActivationSpec& act, const McConfig& cfg) {
    validate(cfg);
    NormalStream rng(cfg.seed);
    std::vector<double> g(static_cast<std::size_t>(cfg.d));
    McEstimate est;
    NeumaierSum sum, sumsq;
    for (std::int64_t i = 0; i < cfg.samples; ++i) {
        for (double& x : g) x = rng.next();
        const SampleResult r = sample_z1_impl(act, g, cfg.polish);
        sum.add(r.z);
        sumsq.add(r.z * r.z);
        if (r.fallback) ++est.n_infeasible_fallbacks;
        if (r.polished) ++est.n_polished;
    }
    const double n = static_cast<double>(cfg.samples);
    est.mean = sum.value() / n;
    const double var = (sumsq.value() - n * est.mean * est.mean) / (n > 1 ? n - 1 : 1);
    est.std_error = std::sqrt(var > 0.0 ? var : 0.0) / std::sqrt(n);
    return est;
}

std::vector<ConvergenceRow> convergence_study(const ActivationSpec& act,
                                              const std::vector<std::int64_t>& d_list,
                                              std::int64_t samples, std::uint64_t seed) {
    if (d_list.empty()) throw ConfigError("convergence_study: empty dimension list");
    for (std::size_t i = 0; i < d_list.size(); ++i) {
        if (d_list[i] <= 0 || d_list[i] % 2 != 0)
            throw ConfigError("convergence_study: dimensions must be even and positive");
        if (i > 0 && d_list[i] <= d_list[i - 1])
            throw ConfigError("convergence_study: dimensions must be strictly ascending");
    }
    std::vector<ConvergenceRow> rows;
    for (std::int64_t d : d_list) {
        McConfig cfg;
        cfg.d = d;
        cfg.samples = samples;
        cfg.seed = seed;
        const McEstimate e = mc_estimate(act, cfg);
        rows.push_back({d, e.mean, e.std_error});
    }
    return rows;
}

}  // namespace tcm
