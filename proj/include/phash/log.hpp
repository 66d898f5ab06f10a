#pragma once

namespace phash::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

// Current level; initialized from PHASH_LOG on first use (default warn).
Level level();
void set_level(Level lv);

void error(const char* fmt, ...);
void warn(const char* fmt, ...);
void info(const char* fmt, ...);
void debug(const char* fmt, ...);

}  // namespace phash::log
