#pragma once

#include <array>
#include <string_view>

namespace dasc {

/// The six training configurations.
enum class ConfigId { C0, C1, C2, C2M, C3, C3M };

inline constexpr std::array<ConfigId, 6> kAllConfigs = {
    ConfigId::C0, ConfigId::C1, ConfigId::C2, ConfigId::C2M, ConfigId::C3, ConfigId::C3M};

std::string_view to_string(ConfigId id);
/// Throws ConfigError for unknown names.
ConfigId parse_config_id(std::string_view name);

/// C2M and C3M: embedding masks, doubled embedding size, variance terms.
bool is_masked(ConfigId id);
/// Configurations whose loss includes the domain head.
bool trains_domain_head(ConfigId id);
/// Domain-adaptation regime label: none, U*, or S.
std::string_view da_mode(ConfigId id);

}  // namespace dasc
