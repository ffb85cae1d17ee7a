#include "guidecap/optim.hpp"

#include <cmath>

namespace guidecap::numeric {

double LrSchedule::lr_at(int epoch) const {
  if (epoch < 0) throw ContractError("lr_at: negative epoch");
  if (period <= 0) throw ConfigError("lr schedule period must be positive");
  return base * std::pow(factor, static_cast<double>(epoch / period));
}

void AdamState::init(const std::vector<Param*>& params) {
  t = 0;
  m.clear();
  v.clear();
  for (const Param* p : params) {
    m.push_back(Array::zeros(p->value.shape()));
    v.push_back(Array::zeros(p->value.shape()));
  }
}

namespace {

void check_grad(const Param& p, const char* op) {
  if (p.grad.numel() == 0 || !p.grad.same_shape(p.value)) {
    throw ContractError(std::string(op) + ": parameter '" + p.name + "' has no gradient");
  }
}

}  // namespace

void adam_step(AdamState& state, const std::vector<Param*>& params, int epoch) {
  if (state.m.size() != params.size()) {
    throw ContractError("adam_step: state not initialized for this parameter list");
  }
  const double lr = state.schedule.lr_at(epoch);
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    check_grad(p, "adam_step");
    Array& m = state.m[i];
    Array& v = state.v[i];
    for (std::size_t j = 0; j < p.value.numel(); ++j) {
      const double g = p.grad.data()[j];
      m.data()[j] = state.beta1 * m.data()[j] + (1.0 - state.beta1) * g;
      v.data()[j] = state.beta2 * v.data()[j] + (1.0 - state.beta2) * g * g;
      const double mhat = m.data()[j] / bc1;
      const double vhat = v.data()[j] / bc2;
      p.value.data()[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
    require_finite(p.value, "adam_step");
  }
}

void sgd_step(const SgdState& state, const std::vector<Param*>& params, int epoch) {
  const double lr = state.schedule.lr_at(epoch);
  for (Param* p : params) {
    check_grad(*p, "sgd_step");
    for (std::size_t j = 0; j < p->value.numel(); ++j) {
      p->value.data()[j] -= lr * p->grad.data()[j];
    }
    require_finite(p->value, "sgd_step");
  }
}

double clip_global_norm(const std::vector<Param*>& params, double max_norm) {
  double sq = 0.0;
  for (const Param* p : params) {
    check_grad(*p, "clip_global_norm");
    for (std::size_t j = 0; j < p->grad.numel(); ++j) {
      const double g = p->grad.data()[j];
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Param* p : params) {
      for (std::size_t j = 0; j < p->grad.numel(); ++j) p->grad.data()[j] *= s;
    }
  }
  return norm;
}

}  // namespace guidecap::numeric
