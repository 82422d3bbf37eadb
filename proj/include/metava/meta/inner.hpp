#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metava/autodiff/param_set.hpp"
#include "metava/meta/objective.hpp"

namespace metava::meta {

struct InnerResult {
  std::vector<ad::ParamSet> trajectory;  // parameters after each update
  std::vector<double> support_losses;    // loss before each update
  const ad::ParamSet& final() const { return trajectory.back(); }
};

// `updates` full-batch gradient steps of rate alpha on the support batch,
// starting from a copy of theta0. With record_for_meta the steps are
// recorded, so the trajectory stays differentiable with respect to theta0
// when theta0 holds graph leaves. Throws NonFiniteError on a NaN/inf loss.
InnerResult inner_adapt(const ad::ParamSet& theta0, const nn::Batch& support,
                        const Objective& objective, double alpha, std::size_t updates,
                        bool record_for_meta, std::uint64_t stream = 0,
                        const std::string& task = {});

}  // namespace metava::meta
