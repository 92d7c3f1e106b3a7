#include "dasc/config_id.hpp"

#include <string>

#include "dasc/errors.hpp"

namespace dasc {

std::string_view to_string(ConfigId id) {
  switch (id) {
    case ConfigId::C0: return "C0";
    case ConfigId::C1: return "C1";
    case ConfigId::C2: return "C2";
    case ConfigId::C2M: return "C2M";
    case ConfigId::C3: return "C3";
    case ConfigId::C3M: return "C3M";
  }
  return "?";
}

ConfigId parse_config_id(std::string_view name) {
  for (auto id : kAllConfigs)
    if (to_string(id) == name) return id;
  throw ConfigError("unknown configuration '" + std::string(name) +
                    "' (expected C0, C1, C2, C2M, C3 or C3M)");
}

bool is_masked(ConfigId id) { return id == ConfigId::C2M || id == ConfigId::C3M; }

bool trains_domain_head(ConfigId id) { return id != ConfigId::C0 && id != ConfigId::C1; }

std::string_view da_mode(ConfigId id) {
  switch (id) {
    case ConfigId::C0: return "none";
    case ConfigId::C1: return "S";
    case ConfigId::C2:
    case ConfigId::C2M: return "U*";
    case ConfigId::C3:
    case ConfigId::C3M: return "S";
  }
  return "?";
}

}  // namespace dasc
