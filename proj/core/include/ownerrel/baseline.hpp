#pragma once

#include <vector>

#include "ownerrel/geometry.hpp"
#include "ownerrel/matcher.hpp"
#include "ownerrel/priors.hpp"

namespace ownerrel {

inline constexpr double kLogicContainment = 0.9;

// Geometry-only "logic model". For each wheel, candidate vehicles are those
// containing at least 90% of it (or, failing that, any overlapping vehicle);
// the candidate with the smallest distance ratio wins. Wheels sharing a
// vehicle are coupled with their horizontal neighbour. Retained pairs carry
// score 1.
//
// `priors` is accepted so the baseline can stand in wherever the learned
// predictor is used; the decision rule itself is purely geometric.
std::vector<PairPrediction> logic_predict(const Scene& scene, const PriorModel& priors);

}  // namespace ownerrel
