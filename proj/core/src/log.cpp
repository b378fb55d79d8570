#include "retts/log.hpp"

#include <cstdlib>
#include <string_view>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace retts::logging {

namespace {

std::shared_ptr<spdlog::logger> logger() {
  static const auto instance = [] {
    auto l = spdlog::stderr_color_mt("retts");
    l->set_pattern("[%H:%M:%S.%e] [%l] %v");
    l->set_level(spdlog::level::info);
    return l;
  }();
  return instance;
}

Level current = Level::Info;

}  // namespace

void set_level(Level lvl) {
  current = lvl;
  switch (lvl) {
    case Level::Error: logger()->set_level(spdlog::level::err); break;
    case Level::Info: logger()->set_level(spdlog::level::info); break;
    case Level::Debug: logger()->set_level(spdlog::level::debug); break;
  }
}

Level level() { return current; }

void init_from_env() {
  const char* env = std::getenv("RETTS_LOG_LEVEL");
  if (!env) return set_level(Level::Info);
  const std::string_view v(env);
  if (v == "error") return set_level(Level::Error);
  if (v == "debug") return set_level(Level::Debug);
  set_level(Level::Info);
  if (v != "info") logger()->warn("RETTS_LOG_LEVEL='{}' is not one of error, info, debug; using info", v);
}

void error(const std::string& message) { logger()->error(message); }
void info(const std::string& message) { logger()->info(message); }
void debug(const std::string& message) { logger()->debug(message); }

}  // namespace retts::logging
