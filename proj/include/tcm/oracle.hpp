#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "tcm/activations.hpp"

namespace tcm {

// Settings of the finite-dimension Monte Carlo estimator.
struct McConfig {
    std::int64_t d = 4096;        // input dimension; must be even and positive
    std::int64_t samples = 100000;
    std::uint64_t seed = 1;
    bool polish = true;           // restore feasibility of the first-order candidate
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;             // sample stddev / sqrt(samples)
    std::int64_t n_infeasible_fallbacks = 0;  // draws whose candidate could not be certified feasible
    std::int64_t n_polished = 0;              // draws where the feasibility polish engaged
};

// Deterministic standard-normal stream: 64-bit Mersenne Twister uniforms
// mapped to (0,1] and fed through Box-Muller.  The engine is fully specified
// by the standard, so the stream is identical on every platform for a given
// seed, unlike std::normal_distribution.
class NormalStream {
  public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}
    double next();

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Squared distance from g to the feasibility set {q : sum_j f(q_j) w_j >= 0}
// with w = [-1 (d/2 entries); +1 (d/2 entries)], via the first-order candidate
//   nu = max(-f(g)^T w, 0) / ||f'(g)||^2,   q_j = g_j + nu f'(g_j) w_j,
// optionally polished by scaling nu up until the candidate is feasible.
// Feasible draws return exactly 0; a vanishing gradient norm returns 0 as a
// degenerate fallback.
double sample_z1(const ActivationSpec& act, std::int64_t d, const std::vector<double>& g,
                 bool polish = true);

// Mean and standard error of sample_z1 over cfg.samples i.i.d. N(0, I_d) draws.
McEstimate mc_estimate(const ActivationSpec& act, const McConfig& cfg);

struct ConvergenceRow {
    std::int64_t d = 0;
    double mean = 0.0;
    double std_error = 0.0;
};

// Runs mc_estimate for each dimension in d_list (ascending, all even), with the
// same master seed per dimension.
std::vector<ConvergenceRow> convergence_study(const ActivationSpec& act,
                                              const std::vector<std::int64_t>& d_list,
                                              std::int64_t samples, std::uint64_t seed);

}  // namespace tcm
