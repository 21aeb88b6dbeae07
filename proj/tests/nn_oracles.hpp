#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "sicu/nn/layers.hpp"
#include "sicu/nn/optim.hpp"
#include "sicu/rng.hpp"

// Oracles shared by the unit tests and the acceptance run.
namespace test {

using sicu::Rng;
using sicu::nn::Layer;
using sicu::nn::Shape;
using sicu::nn::Tensor;

inline Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

/// Values bounded away from zero so ReLU kinks stay out of reach of h.
inline Tensor<double> offset_tensor(Shape shape, Rng& rng) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.values()) v = (rng.bit() ? 1.0 : -1.0) * rng.uniform(0.05, 1.0);
    return t;
}

inline double weighted_sum(const Tensor<double>& y, const Tensor<double>& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
    return s;
}

struct GradReport {
    double worst = 0.0;
    std::string where;
};

// Central differences of L = sum(w * layer.forward(x)) against backward(w)
// for the input and every parameter.
inline GradReport gradient_check(Layer<double>& layer, Tensor<double> x, Rng& rng, double h = 1e-5) {
    const Tensor<double> y0 = layer.forward(x);
    const Tensor<double> w = random_tensor(y0.shape(), rng);
    const Tensor<double> dx = layer.backward(w);
    auto params = layer.params();
    std::vector<Tensor<double>> analytic;
    for (auto& p : params) analytic.push_back(*p.grad);

    GradReport rep;
    auto compare = [&](double a, double n, const std::string& what) {
        const double err = std::abs(a - n) / std::max(1.0, std::abs(a));
        if (err > rep.worst) {
            rep.worst = err;
            rep.where = what;
        }
    };
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double fp = weighted_sum(layer.forward(x), w);
        x[i] = keep - h;
        const double fm = weighted_sum(layer.forward(x), w);
        x[i] = keep;
        compare(dx[i], (fp - fm) / (2 * h), "input");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor<double>& v = *params[k].value;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double keep = v[i];
            v[i] = keep + h;
            const double fp = weighted_sum(layer.forward(x), w);
            v[i] = keep - h;
            const double fm = weighted_sum(layer.forward(x), w);
            v[i] = keep;
            compare(analytic[k][i], (fp - fm) / (2 * h), params[k].name);
        }
    }
    return rep;
}

inline void randomize_params(Layer<double>& layer, Rng& rng) {
    for (auto& p : layer.params()) {
        for (auto& v : p.value->values()) v = rng.uniform(-1.0, 1.0);
    }
}

/// Independent scalar Adam on f(x) = x^2 from x0; returns the largest gap
/// to the engine's adam_step over `steps` steps.
inline double adam_scalar_gap(int steps, double x0 = 1.0) {
    sicu::nn::AdamConfig cfg;
    Tensor<double> x({1}, x0);
    sicu::nn::AdamMoments<double> mom;
    double xo = x0, m = 0.0, v = 0.0, worst = 0.0;
    for (std::uint64_t t = 1; t <= static_cast<std::uint64_t>(steps); ++t) {
        Tensor<double> g({1}, 2.0 * x[0]);
        sicu::nn::adam_step(x, g, mom, t, cfg);
        const double go = 2.0 * xo;
        m = 0.9 * m + 0.1 * go;
        v = 0.999 * v + 0.001 * go * go;
        const double mh = m / (1.0 - std::pow(0.9, static_cast<double>(t)));
        const double vh = v / (1.0 - std::pow(0.999, static_cast<double>(t)));
        xo -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
        worst = std::max(worst, std::abs(x[0] - xo));
    }
    return worst;
}

}  // namespace test
