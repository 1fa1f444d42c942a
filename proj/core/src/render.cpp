#include "ownerrel/render.hpp"

#include <map>
#include <sstream>

#include "ownerrel/error.hpp"
#include "ownerrel/nn.hpp"

namespace ownerrel {

namespace {

const BoundingBox& lookup(const Scene& scene, ObjectId id) {
  const auto idx = scene.index_of(id);
  if (!idx) fail(ErrorCode::kRender, "render_svg: pair references unknown object " + std::to_string(id));
  return scene.boxes[*idx];
}

void line(std::ostream& out, Point a, Point b, const char* colour) {
  out << "  <line x1=\"" << format_double(a.x) << "\" y1=\"" << format_double(a.y) << "\" x2=\""
      << format_double(b.x) << "\" y2=\"" << format_double(b.y) << "\" stroke=\"" << colour
      << "\" stroke-width=\"2\"/>\n";
}

}  // namespace

std::string render_svg(const Scene& scene, std::span<const PairPrediction> pairs) {
  // wheel -> partner in its couple
  std::map<ObjectId, ObjectId> partner;
  for (const auto& p : pairs) {
    const BoundingBox& a = lookup(scene, p.subject);
    const BoundingBox& b = lookup(scene, p.object);
    if (p.kind == PairKind::kWheelWheel) {
      if (!a.is_wheel() || !b.is_wheel()) fail(ErrorCode::kRender, "render_svg: couple between non-wheels");
      partner[a.id] = b.id;
      partner[b.id] = a.id;
    } else if (!a.is_wheel() || !b.is_vehicle()) {
      fail(ErrorCode::kRender, "render_svg: ownership pair must be wheel then vehicle");
    }
  }

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_double(scene.width) << "\" height=\""
      << format_double(scene.height) << "\" viewBox=\"0 0 " << format_double(scene.width) << ' '
      << format_double(scene.height) << "\">\n";
  out << "  <rect x=\"0\" y=\"0\" width=\"" << format_double(scene.width) << "\" height=\""
      << format_double(scene.height) << "\" fill=\"white\"/>\n";
  for (const auto& b : scene.boxes) {
    const char* colour = b.is_vehicle() ? "black" : "dimgray";
    out << "  <rect x=\"" << format_double(b.x_min) << "\" y=\"" << format_double(b.y_min) << "\" width=\""
        << format_double(b.width()) << "\" height=\"" << format_double(b.height()) << "\" fill=\"none\" stroke=\""
        << colour << "\" stroke-width=\"1\"/>\n";
    out << "  <text x=\"" << format_double(b.x_min) << "\" y=\"" << format_double(b.y_min)
        << "\" font-size=\"12\" fill=\"" << colour << "\">" << b.id << "</text>\n";
  }
  for (const auto& p : pairs) {
    const BoundingBox& a = lookup(scene, p.subject);
    const BoundingBox& b = lookup(scene, p.object);
    if (p.kind == PairKind::kWheelWheel) {
      line(out, a.center(), b.center(), "red");
      continue;
    }
    bool rear;
    if (auto it = partner.find(a.id); it != partner.end()) {
      const BoundingBox& other = lookup(scene, it->second);
      rear = rear_front(a, other).first == &a;
    } else {
      rear = a.center().x > b.center().x;
    }
    line(out, a.center(), b.center(), rear ? "green" : "blue");
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace ownerrel
