#include "quantforge/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>

namespace quantforge {

static LogLevel parse_level() {
    const char* env = std::getenv("QUANTFORGE_LOG");
    if (!env || !*env) return LogLevel::Warn;
    std::string v(env);
    for (auto& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (v == "error" || v == "0") return LogLevel::Error;
    if (v == "warn" || v == "warning" || v == "1") return LogLevel::Warn;
    if (v == "info" || v == "2") return LogLevel::Info;
    if (v == "debug" || v == "3") return LogLevel::Debug;
    return LogLevel::Warn;
}

LogLevel log_level() {
    static const LogLevel level = parse_level();
    return level;
}

void log(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    static std::mutex mu;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::lock_guard<std::mutex> lock(mu);
    std::fprintf(stderr, "[quantforge:%s] %s\n", names[static_cast<int>(level)], msg.c_str());
}

} // namespace quantforge
