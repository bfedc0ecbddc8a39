#pragma once

#include <cstdint>
#include <vector>

#include "backtrack/autodiff.hpp"

namespace backtrack {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over a fixed parameter group.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg);

  // Consumes Parameter::grad; throws TrainingError naming the parameter if a
  // gradient is non-finite.
  void step();
  void zero_grad();
  std::int64_t steps() const { return steps_; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig cfg_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t steps_ = 0;
};

}  // namespace backtrack
