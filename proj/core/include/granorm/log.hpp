#pragma once

#include <string_view>

namespace granorm {

enum class LogLevel { error, warn, info, debug };

/// Reads GRANORM_LOG (error, info, debug; default warn). Output goes to stderr.
void init_logging();
void set_log_level(LogLevel level);

void log_error(std::string_view msg);
void log_warn(std::string_view msg);
void log_info(std::string_view msg);
void log_debug(std::string_view msg);

}  // namespace granorm
