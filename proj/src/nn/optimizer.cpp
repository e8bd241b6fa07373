#include "pointqa/nn/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "pointqa/errors.hpp"

namespace pointqa::nn {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "adamax"; }

OptimizerKind parse_optimizer(const std::string& name) {
    if (name == "adamax") return OptimizerKind::adamax;
    if (name == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + name + "'");
}

double warmup_decay_rate(double base, std::size_t iteration, std::size_t total) {
    if (total == 0) return base;
    const double warmup = std::max(1.0, std::floor(0.1 * static_cast<double>(total)));
    const auto it = static_cast<double>(iteration);
    if (it <= warmup) return base * it / warmup;
    const double span = std::max(1.0, static_cast<double>(total) - warmup);
    const double frac = std::min(1.0, (it - warmup) / span);
    return base * (1.0 - 0.9 * frac);
}

Optimizer::Optimizer(const ParameterSet& params, OptimizerConfig config) : config_(config) {
    if (!(config_.learning_rate > 0)) throw ConfigError("learning rate must be > 0");
    m_ = zero_gradients(params);
    u_ = zero_gradients(params);
}

double gradient_norm(const Gradients& grads) {
    double s = 0;
    for (const auto& g : grads) s += g.squaredNorm();
    return std::sqrt(s);
}

void Optimizer::step(ParameterSet& params, const Gradients& grads, double learning_rate) {
    ++t_;
    double clip = 1.0;
    if (config_.clip_norm > 0) {
        const double norm = gradient_norm(grads);
        if (norm > config_.clip_norm) clip = config_.clip_norm / norm;
    }
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Matrix g = grads[i] * clip;
        m_[i] = b1 * m_[i] + (1 - b1) * g;
        if (config_.kind == OptimizerKind::adamax) {
            u_[i] = (b2 * u_[i]).cwiseMax(g.cwiseAbs());
            params[i].value.array() -= (learning_rate / bias1) * m_[i].array() / (u_[i].array() + config_.epsilon);
        } else {
            u_[i] = b2 * u_[i] + (1 - b2) * g.cwiseProduct(g);
            params[i].value.array() -=
                learning_rate * (m_[i].array() / bias1) / ((u_[i].array() / bias2).sqrt() + config_.epsilon);
        }
    }
}

}  // namespace pointqa::nn
