#pragma once

#include <string>
#include <vector>

#include "mqaf/tensor.hpp"

namespace mqaf {

struct AdamConfig {
  double learning_rate = 8e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled: applied directly to the weights
};

// Adam with bias correction over named parameter groups. Weight decay is
// decoupled: param -= lr*wd*param before the moment update. A non-finite
// gradient aborts the whole step (no partial updates) and names the group.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamConfig config) : config_(config) {}

  void add_group(std::string name, std::vector<Tensor> params);
  void step();
  void zero_grad();
  std::size_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }

 private:
  struct Slot {
    Tensor param;
    std::vector<double> m;
    std::vector<double> v;
  };
  struct Group {
    std::string name;
    std::vector<Slot> slots;
  };

  AdamConfig config_;
  std::vector<Group> groups_;
  std::size_t step_count_ = 0;
};

}  // namespace mqaf
