#include "granorm/log.hpp"

#include <cstdlib>
#include <memory>
#include <string>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace granorm {

namespace {

spdlog::logger& logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = std::make_shared<spdlog::logger>("granorm", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::warn);
    return l;
  }();
  return *instance;
}

}  // namespace

void set_log_level(LogLevel level) {
  switch (level) {
    case LogLevel::error: logger().set_level(spdlog::level::err); break;
    case LogLevel::warn: logger().set_level(spdlog::level::warn); break;
    case LogLevel::info: logger().set_level(spdlog::level::info); break;
    case LogLevel::debug: logger().set_level(spdlog::level::debug); break;
  }
}

void init_logging() {
  const char* env = std::getenv("GRANORM_LOG");
  if (!env) return;
  std::string v(env);
  if (v == "error") set_log_level(LogLevel::error);
  else if (v == "info") set_log_level(LogLevel::info);
  else if (v == "debug") set_log_level(LogLevel::debug);
  else log_warn("GRANORM_LOG=" + v + " not recognized; expected error, info or debug");
}

void log_error(std::string_view msg) { logger().error("{}", msg); }
void log_warn(std::string_view msg) { logger().warn("{}", msg); }
void log_info(std::string_view msg) { logger().info("{}", msg); }
void log_debug(std::string_view msg) { logger().debug("{}", msg); }

}  // namespace granorm
