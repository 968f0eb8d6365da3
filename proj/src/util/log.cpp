#include "crossgen/util/log.hpp"

#include <iostream>
#include <mutex>

namespace crossgen {
namespace {

std::mutex sink_mutex;

void default_sink(LogLevel level, const std::string& message) {
  std::cerr << (level == LogLevel::warning ? "warning: " : "") << message << '\n';
}

LogSink& sink() {
  static LogSink s = default_sink;
  return s;
}

void emit(LogLevel level, const std::string& message) {
  std::lock_guard lock(sink_mutex);
  if (sink()) sink()(level, message);
}

}  // namespace

LogSink set_log_sink(LogSink s) {
  std::lock_guard lock(sink_mutex);
  return std::exchange(sink(), std::move(s));
}

void log_info(const std::string& message) { emit(LogLevel::info, message); }
void log_warning(const std::string& message) { emit(LogLevel::warning, message); }

}  // namespace crossgen
