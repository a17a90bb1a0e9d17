#include "bda/log.hpp"

#include <iostream>

namespace bda {

namespace {
LogLevel g_level = LogLevel::kWarning;
}

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level; }

void log_warning(std::string_view msg) {
  if (g_level >= LogLevel::kWarning) std::cerr << "warning: " << msg << '\n';
}

void log_info(std::string_view msg) {
  if (g_level >= LogLevel::kInfo) std::cerr << "info: " << msg << '\n';
}

}  // namespace bda
