#include "sicu/nn/optim.hpp"

#include <cmath>

#include "sicu/error.hpp"

namespace sicu::nn {

template <typename T>
void adam_step(Tensor<T>& param, const Tensor<T>& grad, AdamMoments<T>& moments, std::uint64_t t,
               const AdamConfig& c) {
    if (grad.shape() != param.shape()) {
        throw InvalidInput("adam: gradient shape " + shape_string(grad.shape()) + " does not match parameter " +
                           shape_string(param.shape()));
    }
    if (moments.m.empty() && moments.v.empty()) {
        moments.m = Tensor<T>(param.shape());
        moments.v = Tensor<T>(param.shape());
    }
    if (moments.m.shape() != param.shape() || moments.v.shape() != param.shape()) {
        throw InvalidInput("adam: moment shape does not match parameter " + shape_string(param.shape()));
    }
    if (t == 0) throw InvalidInput("adam: step counter starts at 1");
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        const double m = c.beta1 * moments.m[i] + (1.0 - c.beta1) * g;
        const double v = c.beta2 * moments.v[i] + (1.0 - c.beta2) * g * g;
        moments.m[i] = static_cast<T>(m);
        moments.v[i] = static_cast<T>(v);
        const double m_hat = m / bc1;
        const double v_hat = v / bc2;
        param[i] = static_cast<T>(param[i] - c.lr * m_hat / (std::sqrt(v_hat) + c.eps));
    }
}

template <typename T>
void adam_step(std::vector<ParamRef<T>>& params, AdamState<T>& state) {
    if (state.moments.empty()) state.moments.resize(params.size());
    if (state.moments.size() != params.size()) throw InvalidInput("adam: parameter count changed between steps");
    ++state.t;
    for (std::size_t k = 0; k < params.size(); ++k) {
        adam_step(*params[k].value, *params[k].grad, state.moments[k], state.t, state.config);
    }
}

template void adam_step(Tensor<float>&, const Tensor<float>&, AdamMoments<float>&, std::uint64_t, const AdamConfig&);
template void adam_step(Tensor<double>&, const Tensor<double>&, AdamMoments<double>&, std::uint64_t,
                        const AdamConfig&);
template void adam_step(std::vector<ParamRef<float>>&, AdamState<float>&);
template void adam_step(std::vector<ParamRef<double>>&, AdamState<double>&);

}  // namespace sicu::nn
