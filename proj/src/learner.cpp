#include "sfrl/learner.hpp"

#include "sfrl/errors.hpp"

namespace sfrl {

void Learner::inject_confidence_set(TransitionConfidenceSet) {
  throw UsageError(name() + " does not accept external confidence sets");
}

}  // namespace sfrl
