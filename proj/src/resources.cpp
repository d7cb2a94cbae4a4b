#include "trialqc/resources.hpp"

#include <cstdlib>

#ifndef TRIALQC_RESOURCE_DIR
#define TRIALQC_RESOURCE_DIR "data"
#endif

namespace trialqc {

std::filesystem::path resource_dir() {
    if (const char* env = std::getenv("TRIALQC_RESOURCES"); env && *env)
        return env;
    return TRIALQC_RESOURCE_DIR;
}

} // namespace trialqc
