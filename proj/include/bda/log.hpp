#pragma once

#include <string_view>

namespace bda {

enum class LogLevel { kQuiet = 0, kWarning = 1, kInfo = 2 };

void set_log_level(LogLevel level);
LogLevel log_level();

// Messages go to stderr, prefixed with the level.
void log_warning(std::string_view msg);
void log_info(std::string_view msg);

}  // namespace bda
