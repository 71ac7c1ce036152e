#include "emde/logging.hpp"

#include <atomic>
#include <iostream>

namespace emde {

namespace {
std::atomic<bool> g_quiet{false};
}

void set_quiet(bool quiet) noexcept { g_quiet = quiet; }

void log_info(std::string_view message) {
    if (!g_quiet) std::cerr << message << '\n';
}

void log_warning(std::string_view message) {
    if (!g_quiet) std::cerr << "warning: " << message << '\n';
}

}  // namespace emde
