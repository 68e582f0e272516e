#include "qidn/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace qidn::log {

namespace {
std::atomic<Level> current{Level::warn};
std::mutex sink_mutex;

void emit(Level at, const char* tag, const std::string& message) {
  if (at < current.load()) return;
  std::lock_guard<std::mutex> lock(sink_mutex);
  std::cerr << "[" << tag << "] " << message << '\n';
}
}  // namespace

void set_level(Level level) { current.store(level); }
Level level() { return current.load(); }

void debug(const std::string& message) { emit(Level::debug, "debug", message); }
void info(const std::string& message) { emit(Level::info, "info", message); }
void warn(const std::string& message) { emit(Level::warn, "warn", message); }
void error(const std::string& message) { emit(Level::error, "error", message); }

}  // namespace qidn::log
