#pragma once

#include <string_view>

namespace metava::log {

enum class Level { debug = 0, info = 1, warning = 2, error = 3, silent = 4 };

void set_level(Level level);
Level level();

void write(Level level, std::string_view message);
inline void info(std::string_view m) { write(Level::info, m); }
inline void warn(std::string_view m) { write(Level::warning, m); }
inline void error(std::string_view m) { write(Level::error, m); }

}  // namespace metava::log
