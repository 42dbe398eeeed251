#pragma once

#include <string>

#include "diffplan/evaluate.hpp"
#include "diffplan/scene.hpp"

namespace diffplan::sim {

/// Two-panel SVG: plans and executed paths over the scene (left) and executed
/// speed over time (right). `scene` may be null.
std::string render_report_svg(const EvalReport& report, const SceneSpec* scene);

}  // namespace diffplan::sim
