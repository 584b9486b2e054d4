#pragma once

#include <string_view>

// Shipped configuration assets, compiled in from data/.
namespace cdmizer::assets {

std::string_view fixture_schema();
std::string_view target_registry();
std::string_view default_prompt();
std::string_view reference_scores();

}  // namespace cdmizer::assets
