#include "metava/meta/inner.hpp"

#include <cmath>
#include <stdexcept>

#include "metava/autodiff/gradient.hpp"

namespace metava::meta {

InnerResult inner_adapt(const ad::ParamSet& theta0, const nn::Batch& support,
                        const Objective& objective, double alpha, std::size_t updates,
                        bool record_for_meta, std::uint64_t stream, const std::string& task) {
  if (updates == 0) throw std::invalid_argument("inner_adapt: updates must be at least 1");
  if (alpha < 0) throw std::invalid_argument("inner_adapt: negative learning rate");
  // Gradients are needed on either path, whatever the caller's mode.
  ad::GradModeGuard recording(true);
  InnerResult out;
  ad::ParamSet theta = record_for_meta ? theta0 : theta0.clone();
  for (std::size_t step = 0; step < updates; ++step) {
    const ad::ParamSet at = record_for_meta ? theta : theta.as_leaves();
    ad::Tensor loss = objective.loss(at, support, mix_seed(stream, step));
    const double value = loss.item();
    if (!std::isfinite(value)) throw NonFiniteError("inner_adapt", step, task);
    out.support_losses.push_back(value);
    const ad::ParamSet grad = ad::gradient(loss, at, record_for_meta);
    theta = record_for_meta ? at.updated(grad, alpha) : at.updated_values(grad, alpha);
    out.trajectory.push_back(theta);
  }
  return out;
}

}  // namespace metava::meta
