#include "tcm/activations.hpp"

#include <cmath>
#include <map>

namespace tcm {

double eval(const ActivationSpec& act, double x) { return act.value(x); }
double deriv(const ActivationSpec& act, double x) { return act.derivative(x); }

namespace {

constexpr double kTwoOverSqrtPi = 1.1283791670955125739;

ActivationSpec make_relu() {
    ActivationSpec s;
    s.name = "relu";
    s.value = [](double x) { return x > 0.0 ? x : 0.0; };
    // Right-continuous derivative: the subgradient at 0 is taken as 1.
    s.derivative = [](double x) { return x >= 0.0 ? 1.0 : 0.0; };
    s.closed_form_moments = MomentSet{0.3989422804014326779, 0.5, 0.5};
    s.kinks = {0.0};
    return s;
}

ActivationSpec make_quadratic() {
    ActivationSpec s;
    s.name = "quadratic";
    s.value = [](double x) { return x * x; };
    s.derivative = [](double x) { return 2.0 * x; };
    s.closed_form_moments = MomentSet{1.0, 3.0, 4.0};
    return s;
}

ActivationSpec make_erf() {
    ActivationSpec s;
    s.name = "erf";
    s.value = [](double x) { return std::erf(x); };
    s.derivative = [](double x) { return kTwoOverSqrtPi * std::exp(-x * x); };
    // m2 = (2/pi) asin(2/3), dm2 = 4 / (sqrt(5) pi).
    s.closed_form_moments = MomentSet{0.0, 0.4645590543975399785, 0.5694100347337416468};
    return s;
}

ActivationSpec make_tanh() {
    ActivationSpec s;
    s.name = "tanh";
    s.value = [](double x) { return std::tanh(x); };
    s.derivative = [](double x) {
        const double t = std::tanh(x);
        return 1.0 - t * t;
    };
    // No elementary closed form; constants frozen from order-120 quadrature.
    s.closed_form_moments = MomentSet{0.0, 0.3942944903978411744, 0.4644029024482682420};
    return s;
}

const std::map<std::string, ActivationSpec, std::less<>>& builtin_map() {
    static const std::map<std::string, ActivationSpec, std::less<>> m = [] {
        std::map<std::string, ActivationSpec, std::less<>> out;
        out.emplace("relu", make_relu());
        out.emplace("quadratic", make_quadratic());
        out.emplace("erf", make_erf());
        out.emplace("tanh", make_tanh());
        return out;
    }();
    return m;
}

}  // namespace

MomentSet moments_by_quadrature(const ActivationSpec& act, const QuadratureGrid& grid) {
    MomentSet ms;
    if (act.kinks.empty()) {
        ms.m1 = expect1([&](double g) { return act.value(g); }, grid);
        ms.m2 = expect1([&](double g) { const double v = act.value(g); return v * v; }, grid);
        ms.dm2 = expect1([&](double g) { const double v = act.derivative(g); return v * v; }, grid);
    } else {
        ms.m1 = expect_piecewise([&](double g) { return act.value(g); }, act.kinks, grid.order);
        ms.m2 = expect_piecewise([&](double g) { const double v = act.value(g); return v * v; },
                                 act.kinks, grid.order);
        ms.dm2 = expect_piecewise([&](double g) { const double v = act.derivative(g); return v * v; },
                                  act.kinks, grid.order);
    }
    return ms;
}

MomentSet moments(const ActivationSpec& act, const QuadratureGrid& grid) {
    if (act.closed_form_moments) return *act.closed_form_moments;
    const MomentSet a = moments_by_quadrature(act, grid);
    const QuadratureGrid doubled = gauss_hermite(std::min(512, 2 * grid.order));
    const MomentSet b = moments_by_quadrature(act, doubled);
    const double disc = std::max({std::abs(a.m1 - b.m1), std::abs(a.m2 - b.m2),
                                  std::abs(a.dm2 - b.dm2)});
    if (!(disc < 1e-7)) {
        throw ConvergenceError("activation moments did not converge: grid orders " +
                               std::to_string(grid.order) + " and " + std::to_string(doubled.order) +
                               " disagree by " + std::to_string(disc));
    }
    return a;
}

const ActivationSpec& activation_by_id(std::string_view id) {
    const auto& m = builtin_map();
    const auto it = m.find(id);
    if (it == m.end()) {
        throw ConfigError("unknown activation id: " + std::string(id) +
                          " (expected relu|quadratic|erf|tanh)");
    }
    return it->second;
}

const std::vector<std::string>& builtin_activation_ids() {
    static const std::vector<std::string> ids = {"relu", "quadratic", "erf", "tanh"};
    return ids;
}

}  // namespace tcm
