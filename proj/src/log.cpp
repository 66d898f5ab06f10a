#include "phash/log.hpp"

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace phash::log {

namespace {

Level parse_env() {
    const char* env = std::getenv("PHASH_LOG");
    if (env == nullptr) return Level::warn;
    if (std::strcmp(env, "error") == 0) return Level::error;
    if (std::strcmp(env, "warn") == 0) return Level::warn;
    if (std::strcmp(env, "info") == 0) return Level::info;
    if (std::strcmp(env, "debug") == 0) return Level::debug;
    std::fprintf(stderr, "[phash] unknown PHASH_LOG value '%s', using warn\n", env);
    return Level::warn;
}

Level& current() {
    static Level lv = parse_env();
    return lv;
}

void vwrite(Level lv, const char* tag, const char* fmt, va_list ap) {
    if (lv > current()) return;
    std::fprintf(stderr, "[phash %s] ", tag);
    std::vfprintf(stderr, fmt, ap);
    std::fputc('\n', stderr);
}

}  // namespace

Level level() { return current(); }
void set_level(Level lv) { current() = lv; }

#define PHASH_LOG_IMPL(name, lv, tag)            \
    void name(const char* fmt, ...) {            \
        va_list ap;                              \
        va_start(ap, fmt);                       \
        vwrite(lv, tag, fmt, ap);                \
        va_end(ap);                              \
    }

PHASH_LOG_IMPL(error, Level::error, "error")
PHASH_LOG_IMPL(warn, Level::warn, "warn")
PHASH_LOG_IMPL(info, Level::info, "info")
PHASH_LOG_IMPL(debug, Level::debug, "debug")

#undef PHASH_LOG_IMPL

}  // namespace phash::log
