#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace repcnn::log {

enum class Level : int { quiet = 0, info = 1, debug = 2 };

// Verbosity comes from REPCNN_LOG (0/quiet, 1/info, 2/debug). Default: info.
inline Level level() {
    static Level lv = [] {
        const char* env = std::getenv("REPCNN_LOG");
        if (!env) return Level::info;
        if (!std::strcmp(env, "0") || !std::strcmp(env, "quiet")) return Level::quiet;
        if (!std::strcmp(env, "2") || !std::strcmp(env, "debug")) return Level::debug;
        return Level::info;
    }();
    return lv;
}

template <typename... Args>
void info(const char* fmt, Args... args) {
    if (level() >= Level::info) {
        std::fprintf(stderr, "[repcnn] ");
        std::fprintf(stderr, fmt, args...);
        std::fprintf(stderr, "\n");
    }
}

template <typename... Args>
void debug(const char* fmt, Args... args) {
    if (level() >= Level::debug) {
        std::fprintf(stderr, "[repcnn:debug] ");
        std::fprintf(stderr, fmt, args...);
        std::fprintf(stderr, "\n");
    }
}

}  // namespace repcnn::log
