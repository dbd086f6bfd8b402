#pragma once

#include <vector>

#include "tcm/gaussian.hpp"
#include "tcm/overlap.hpp"

namespace tcm {

// Parameters of the lifted variational free energy at level r >= 1.
// The vectors hold the interior layers k = 2..r (empty at level 1); layer 1 is
// implicitly pinned to p = q = 1 and the chain is closed below by p = q = 0.
struct LiftParams {
    std::vector<double> p;  // overlaps p_2..p_r, descending within (0,1)
    std::vector<double> q;  // overlaps q_2..q_r, descending within (0,1)
    std::vector<double> c;  // layer exponents c_2..c_r (> 0, or all 0 to collapse)
    double gamma_sq = 0.5;    // quadratic penalty of the interaction term
    double gamma_sq_p = 0.5;  // quadratic penalty of the sphere term

    int level() const { return static_cast<int>(p.size()) + 1; }
};

// Inputs of the closed-form Gaussian kernel: the average over u ~ N(0,1) of
//   exp(-B * max(sqrt(gap) * u + C, 0)^2),
// written via the effective threshold h_eff = -C / sqrt(gap).
struct FztInputs {
    double h_eff = 0.0;
    double B = 0.0;
    double C = 0.0;
    double gap = 0.0;
};

FztInputs make_fzt_inputs(double B, double gap, double C);

// Closed form of the kernel above; result in (0, 1]; exactly 1 when B = 0.
double fzt_kernel(const FztInputs& in);

// log of fzt_kernel, stable far into the underflow regime (C >> 0 with B > 0).
double log_fzt_kernel(const FztInputs& in);

// Variance parameter of the replica-symmetric limit: (m2 - m1^2) / (2 dm2).
double z_infinity(const MomentSet& ms);

// Level-1 free energy: -1 + sqrt(alpha * z_inf); its zero in alpha is the
// level-1 capacity 1 / z_inf.
double psi_level1(double alpha, const MomentSet& ms);

// Sphere interaction I_sph = gamma_sq_p - sum_k log(Theta_k/Theta_{k-1})/(2 c_k)
//                            + q_r / (2 Theta_r),
// with Theta_1 = 2 gamma_sq_p and Theta_k = Theta_{k-1} - c_k (q_{k-1} - q_k).
// Throws DomainError when any Theta_k <= 0.  All-zero c collapses to the
// level-1 value gamma_sq_p + 1/(4 gamma_sq_p).
double sphere_term(const LiftParams& lp);

// Interaction term I_net = gamma_sq - (alpha / c_r) * E[log of the nested
// powered means of fzt_kernel], where the innermost Gaussian is integrated in
// closed form and each outer level applies the exponent c_k / c_{k-1}.
// grid: per-axis Gauss-Hermite rule of the outer expectations.
// All-zero c collapses to gamma_sq + alpha * z_inf / (4 gamma_sq).
double net_term(const LiftParams& lp, const OverlapFunction& rho, double alpha,
                const QuadratureGrid& grid);

// The full free energy
//   psi = 1/2 sum_k (p_{k-1} q_{k-1} - p_k q_k) c_k - I_sph + I_net;
// the capacity is the alpha for which stationary psi equals 0.
double psi(const LiftParams& lp, const OverlapFunction& rho, double alpha,
           const QuadratureGrid& grid);

}  // namespace tcm
