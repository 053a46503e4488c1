#include "factorgate/log.hpp"

#include <iostream>
#include <mutex>

namespace factorgate::log {
namespace {

const char* level_name(Level level) {
    switch (level) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warn";
        case Level::error: return "error";
        case Level::off: return "off";
    }
    return "?";
}

struct State {
    std::mutex mutex;
    Level level = Level::warn;
    Sink sink = [](Level lv, std::string_view m) {
        std::cerr << '[' << level_name(lv) << "] " << m << '\n';
    };
};

State& state() {
    static State s;
    return s;
}

}  // namespace

void set_level(Level lv) {
    std::lock_guard lock(state().mutex);
    state().level = lv;
}

Level level() {
    std::lock_guard lock(state().mutex);
    return state().level;
}

Sink set_sink(Sink sink) {
    std::lock_guard lock(state().mutex);
    std::swap(state().sink, sink);
    return sink;
}

void write(Level lv, std::string_view message) {
    std::lock_guard lock(state().mutex);
    if (lv < state().level || state().level == Level::off) return;
    if (state().sink) state().sink(lv, message);
}

Capture::Capture(Level min_level) : previous_level_(level()) {
    set_level(min_level);
    previous_ = set_sink([this](Level, std::string_view m) { messages_.emplace_back(m); });
}

Capture::~Capture() {
    set_sink(std::move(previous_));
    set_level(previous_level_);
}

bool Capture::contains(std::string_view needle) const {
    for (const auto& m : messages_) {
        if (m.find(needle) != std::string::npos) return true;
    }
    return false;
}

}  // namespace factorgate::log
