#include "tcm/gaussian.hpp"

#include <Eigen/Dense>

#include <map>
#include <mutex>

namespace tcm {
namespace {

// Golub-Welsch: nodes are eigenvalues of the symmetric tridiagonal Jacobi
// matrix of the orthogonal-polynomial recurrence; weights are mu0 times the
// squared first components of the eigenvectors.
struct Rule {
    std::vector<double> nodes, weights;
};

Rule golub_welsch(const std::vector<double>& offdiag, double mu0) {
    const int n = static_cast<int>(offdiag.size()) + 1;
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k + 1 < n; ++k) {
        jac(k, k + 1) = offdiag[k];
        jac(k + 1, k) = offdiag[k];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    Rule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        r.nodes[i] = es.eigenvalues()(i);
        double v0 = es.eigenvectors()(0, i);
        r.weights[i] = mu0 * v0 * v0;
    }
    return r;
}

const Rule& hermite_rule(int order) {
    static std::map<int, Rule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(order);
    if (it != cache.end()) return it->second;
    // probabilists' Hermite: beta_k = sqrt(k)
    std::vector<double> off(order - 1);
    for (int k = 1; k < order; ++k) off[k - 1] = std::sqrt(static_cast<double>(k));
    Rule r = golub_welsch(off, 1.0);
    double s = 0.0;
    for (double w : r.weights) s += w;
    for (double& w : r.weights) w /= s;
    return cache.emplace(order, std::move(r)).first->second;
}

const Rule& legendre_rule(int order) {
    static std::map<int, Rule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(order);
    if (it != cache.end()) return it->second;
    // Legendre on [-1,1]: beta_k = k / sqrt(4k^2 - 1), mu0 = 2
    std::vector<double> off(order - 1);
    for (int k = 1; k < order; ++k)
        off[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
    Rule r = golub_welsch(off, 2.0);
    return cache.emplace(order, std::move(r)).first->second;
}

}  // namespace

QuadratureGrid gauss_hermite(int order) {
    if (order < 2 || order > 512)
        throw ConfigError("gauss_hermite: order must be in [2, 512]");
    const Rule& r = hermite_rule(order);
    return QuadratureGrid{order, r.nodes, r.weights};
}

QuadratureGrid gauss_legendre_panel(int order, double a, double b) {
    if (order < 2 || order > 512)
        throw ConfigError("gauss_legendre_panel: order must be in [2, 512]");
    if (!(b > a)) throw ConfigError("gauss_legendre_panel: requires b > a");
    const Rule& ref = legendre_rule(order);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    QuadratureGrid g;
    g.order = order;
    g.nodes.resize(ref.nodes.size());
    g.weights.resize(ref.nodes.size());
    for (std::size_t i = 0; i < ref.nodes.size(); ++i) {
        double x = mid + half * ref.nodes[i];
        g.nodes[i] = x;
        g.weights[i] = ref.weights[i] * half * normal_pdf(x);
    }
    return g;
}

}  // namespace tcm
