#include "mqaf/optimizer.hpp"

#include <cmath>

namespace mqaf {

void AdamOptimizer::add_group(std::string name, std::vector<Tensor> params) {
  Group g;
  g.name = std::move(name);
  for (auto& p : params) {
    if (!p.defined() || !p.requires_grad())
      throw Error("optimizer: group '" + g.name +
                  "' contains a non-trainable tensor");
    Slot s;
    s.param = p;
    s.m.assign(p.numel(), 0.0);
    s.v.assign(p.numel(), 0.0);
    g.slots.push_back(std::move(s));
  }
  groups_.push_back(std::move(g));
}

void AdamOptimizer::step() {
  // Validate every gradient before touching any parameter so an abort
  // leaves the model state intact.
  for (const auto& g : groups_)
    for (const auto& s : g.slots) {
      if (!s.param.has_grad()) continue;
      for (double gv : s.param.grad())
        if (!std::isfinite(gv))
          throw NumericError("adam: non-finite gradient in parameter group '" +
                             g.name + "'");
    }

  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);

  for (auto& g : groups_)
    for (auto& s : g.slots) {
      // Parameters no backward pass reached this step stay bitwise intact
      // (no decay either), so loss terms update exactly the groups they
      // are wired to.
      if (!s.param.has_grad()) continue;
      auto& p = s.param.mutable_values();
      const auto& grad = s.param.grad();
      if (config_.weight_decay != 0.0) {
        const double decay = config_.learning_rate * config_.weight_decay;
        for (auto& w : p) w -= decay * w;
      }
      for (std::size_t i = 0; i < p.size(); ++i) {
        s.m[i] = config_.beta1 * s.m[i] + (1.0 - config_.beta1) * grad[i];
        s.v[i] =
            config_.beta2 * s.v[i] + (1.0 - config_.beta2) * grad[i] * grad[i];
        const double m_hat = s.m[i] / bc1;
        const double v_hat = s.v[i] / bc2;
        p[i] -= config_.learning_rate * m_hat /
                (std::sqrt(v_hat) + config_.epsilon);
      }
    }
}

void AdamOptimizer::zero_grad() {
  for (auto& g : groups_)
    for (auto& s : g.slots) s.param.zero_grad();
}

}  // namespace mqaf
