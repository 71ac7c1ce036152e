#pragma once

#include <string_view>

namespace emde {

void set_quiet(bool quiet) noexcept;
void log_info(std::string_view message);
void log_warning(std::string_view message);

}  // namespace emde
