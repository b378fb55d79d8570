#pragma once

#include <string>

namespace retts::logging {

enum class Level { Error, Info, Debug };

/// Reads RETTS_LOG_LEVEL (error, info, debug; default info). Unknown values
/// fall back to info with a warning.
void init_from_env();
void set_level(Level level);
Level level();

void error(const std::string& message);
void info(const std::string& message);
void debug(const std::string& message);

}  // namespace retts::logging
