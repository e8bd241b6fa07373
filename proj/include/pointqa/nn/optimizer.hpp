#pragma once

#include <string>

#include "pointqa/nn/tape.hpp"

namespace pointqa::nn {

enum class OptimizerKind { adamax, adam };

std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adamax;
    double learning_rate = 0.002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double clip_norm = 0;  // global gradient-norm clip; 0 disables
};

// Linear warmup over the first 10% of total iterations, then linear decay to
// 10% of the base rate at the last iteration. Iterations are 1-based.
double warmup_decay_rate(double base, std::size_t iteration, std::size_t total);

class Optimizer {
public:
    Optimizer(const ParameterSet& params, OptimizerConfig config);

    // Applies one update with the given learning rate; grads are consumed as-is.
    void step(ParameterSet& params, const Gradients& grads, double learning_rate);
    std::size_t steps() const { return t_; }
    const OptimizerConfig& config() const { return config_; }

private:
    OptimizerConfig config_;
    std::vector<Matrix> m_;
    std::vector<Matrix> u_;
    std::size_t t_ = 0;
};

double gradient_norm(const Gradients& grads);

}  // namespace pointqa::nn
