#include "pileload/numerics/radam.hpp"

#include <cmath>
#include <stdexcept>

#include "pileload/errors.hpp"

namespace pileload::nn {

RadamState make_radam_state(const ParamSet& params, double beta1, double beta2,
                            double epsilon) {
  RadamState state;
  state.beta1 = beta1;
  state.beta2 = beta2;
  state.epsilon = epsilon;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& p = params.value(i);
    state.first_moment.emplace_back(p.rows(), p.cols(), 0.0);
    state.second_moment.emplace_back(p.rows(), p.cols(), 0.0);
  }
  return state;
}

void radam_step(ParamSet& params, RadamState& state, double lr) {
  if (params.empty()) throw std::invalid_argument("radam_step: no gradients to apply");
  if (!(lr >= 0.0)) throw std::invalid_argument("radam_step: learning rate must be >= 0");
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ShapeError("radam_step: optimizer state tracks " +
                     std::to_string(state.first_moment.size()) + " tensors, params have " +
                     std::to_string(params.size()));
  }

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double b1_t = std::pow(b1, t);
  const double b2_t = std::pow(b2, t);
  const double rho_inf = 2.0 / (1.0 - b2) - 1.0;
  const double rho_t = rho_inf - 2.0 * t * b2_t / (1.0 - b2_t);
  const bool adaptive = rho_t > 4.0;
  double rect = 0.0;
  if (adaptive) {
    rect = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) /
                     ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
  }

  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = params.value(i);
    const Matrix& g = params.grad(i);
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    if (!m.same_shape(p) || !v.same_shape(p)) {
      throw ShapeError("radam_step: moment shape mismatch for '" + params.name(i) + "'");
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g.data()[k];
      double& mk = m.data()[k];
      double& vk = v.data()[k];
      mk = b1 * mk + (1.0 - b1) * gk;
      vk = b2 * vk + (1.0 - b2) * gk * gk;
      const double m_hat = mk / (1.0 - b1_t);
      if (adaptive) {
        const double v_hat = std::sqrt(vk / (1.0 - b2_t));
        p.data()[k] -= lr * rect * m_hat / (v_hat + state.epsilon);
      } else {
        p.data()[k] -= lr * m_hat;
      }
    }
  }
}

}  // namespace pileload::nn
