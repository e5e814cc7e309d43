#pragma once

#include <cstddef>

namespace rmix {

/// Random-walk proposal scale for a log-scale Metropolis-Hastings step.
/// Adapted multiplicatively during burn-in only; once `adapting` is false the
/// scale never changes again so the post-burn-in kernel is homogeneous.
struct AdaptiveScale {
  double current = 1.0;
  double target = 0.35;
  bool adapting = true;
  std::size_t proposed = 0;
  std::size_t accepted = 0;

  void record(bool was_accepted) {
    ++proposed;
    if (was_accepted) ++accepted;
  }

  double acceptance_rate() const {
    return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
  }
};

/// Robbins-Monro update: current <- current * exp(t^-0.6 * (1{accepted} - target)).
/// Identity when scale.adapting is false. `iteration` is 1-based.
AdaptiveScale adapt_scale(AdaptiveScale scale, bool accepted, std::size_t iteration);

/// Result of one Metropolis-Hastings proposal.
struct MhResult {
  double value;
  bool accepted;
};

}  // namespace rmix
