#pragma once

#include <filesystem>

namespace trialqc {

/// Directory holding the shipped knowledge base, element library, templates and
/// parameter files. TRIALQC_RESOURCES overrides the build-time location.
std::filesystem::path resource_dir();

} // namespace trialqc
