#pragma once

#include <string>
#include <vector>

#include "tcm/free_energy.hpp"

namespace tcm {

// Lifting level selector: r >= 1; `partial` pins the overlaps of a two-layer
// lift to zero (meaningful only for r == 2).
struct LevelSpec {
    int r = 1;
    bool partial = false;

    std::string label() const;  // "1", "2-partial", "2-full", "3-full", ...
};

struct SolverConfig {
    double fd_step = 1e-5;        // central-difference step for free-energy derivatives
    double jacobian_step = 1e-4;  // central step for residual Jacobians
    double damping = 1.0 / 3.0;   // multiplicative shrink of the LM parameter on success
    int max_iters = 200;
    double alpha_lo = 1.5;
    double alpha_hi = 5.0;
    double tol_resid = 1e-8;      // stationarity target (reported bound is 1e-7)
    double tol_psi = 1e-9;        // free-energy magnitude at the capacity
    int grid_order = 120;         // per-axis order of the interaction expectations, r <= 3
    int grid_order_r4 = 48;       // per-axis order for the threefold nesting at r = 4
};

void validate(const SolverConfig& cfg);

struct ClosedFormLayers {
    double gamma_p = 0.0;
    std::vector<double> c;
};

// Backward recursion turning the overlap chains (p_2..p_r, q_2..q_r) into the
// sphere multiplier gamma_sq_p and the layer exponents c_2..c_r.  These are
// exact consequences of stationarity with respect to q and gamma_sq_p, so
// substituting them reduces the unknowns to (p, q, gamma_sq).
// Throws DomainError when consecutive overlaps coincide (division by zero).
ClosedFormLayers closed_form_gamma_c(const std::vector<double>& p,
                                     const std::vector<double>& q);

// Sphere multiplier of the pinned two-layer variant: (c2 + sqrt(c2^2 + 4)) / 4.
double partial2_relation(double c2);

struct StationaryResult {
    LiftParams params;
    double max_residual = 0.0;  // infinity norm of the free stationarity derivatives
    long iterations = 0;
};

// Solves the stationarity system of psi at fixed alpha on the reduced unknowns
// (p_2..p_r, q_2..q_r, gamma_sq), with the closed-form relations substituted.
// A Levenberg-Marquardt phase is followed, when the valley is too flat for it,
// by a pinned-coordinate refinement that converges the soft mode.
StationaryResult solve_stationary(const OverlapFunction& rho, const LevelSpec& level,
                                  double alpha, const LiftParams& init,
                                  const SolverConfig& cfg);

struct CapacityReport {
    std::string activation;
    LevelSpec level;
    double alpha_c = 0.0;
    LiftParams params;
    double resid_stationarity = 0.0;  // max |stationarity derivative| at the solution
    double resid_psi = 0.0;           // |psi| at (params, alpha_c)
    long iterations = 0;
    double wall_time_s = 0.0;
    std::string note;  // diagnostics, e.g. a pinned variant collapsing to level 1
};

// Computes the capacity alpha_c at the requested level: the alpha for which
// the stationary free energy vanishes.  Level 1 uses the closed form 1/z_inf;
// higher levels warm-start from the level below (continuation) and refine
// alpha by a Newton iteration on the envelope derivative.
// Throws ConvergenceError when the solve or the alpha iteration fails.
CapacityReport capacity(const ActivationSpec& act, const OverlapFunction& rho,
                        const LevelSpec& level, const SolverConfig& cfg);

}  // namespace tcm
