#pragma once

#include "mtq/fluid.hpp"
#include "mtq/rates.hpp"

namespace mtq {

/// Full description of the queue family: the scaling scheme plus the
/// n-independent service and abandonment rates.
struct Model {
  ScalingScheme scheme;
  RateFunction mu = RateFunction::constant(1.0);
  RateFunction theta = RateFunction::constant(1.0);

  FluidInputs fluid_inputs() const { return {scheme.q0, scheme.lambda, mu, theta, scheme.k}; }

  bool has_constant_rates() const {
    return scheme.lambda.is_constant() && scheme.alpha.is_constant() && scheme.k.is_constant() &&
           scheme.gamma.is_constant() && mu.is_constant() && theta.is_constant();
  }
};

}  // namespace mtq
