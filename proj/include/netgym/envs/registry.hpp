#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "netgym/envs/interference_pattern.hpp"
#include "netgym/envs/linear_mesh.hpp"

namespace netgym::envs {

inline std::vector<std::string> names() { return {"interference-pattern", "linear-mesh"}; }

/// Factory for a registered scenario; ValidationError for unknown names.
inline EnvFactory factory(std::string_view name) {
  if (name == "linear-mesh") return linear_mesh_factory();
  if (name == "interference-pattern") return interference_pattern_factory();
  throw ValidationError("unknown environment '" + std::string(name) + "'");
}

}  // namespace netgym::envs
