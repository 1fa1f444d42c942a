#pragma once

#include <span>
#include <string>

#include "ownerrel/geometry.hpp"
#include "ownerrel/matcher.hpp"

namespace ownerrel {

// SVG document in scene pixel coordinates. Couples are red, rear wheel to
// vehicle green, front wheel to vehicle blue. A wheel outside any couple is
// treated as rear when its center lies right of the vehicle center.
std::string render_svg(const Scene& scene, std::span<const PairPrediction> pairs);

}  // namespace ownerrel
