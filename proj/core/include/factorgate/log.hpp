#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace factorgate::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

using Sink = std::function<void(Level, std::string_view)>;

void set_level(Level level);
Level level();

// Replaces the active sink; returns the previous one. The default sink
// writes "[warn] message" lines to stderr.
Sink set_sink(Sink sink);

void write(Level level, std::string_view message);

inline void debug(std::string_view m) { write(Level::debug, m); }
inline void info(std::string_view m) { write(Level::info, m); }
inline void warn(std::string_view m) { write(Level::warn, m); }
inline void error(std::string_view m) { write(Level::error, m); }

// Collects messages for the lifetime of the object (tests, reports).
class Capture {
public:
    explicit Capture(Level min_level = Level::debug);
    ~Capture();
    Capture(const Capture&) = delete;
    Capture& operator=(const Capture&) = delete;

    const std::vector<std::string>& messages() const { return messages_; }
    bool contains(std::string_view needle) const;

private:
    std::vector<std::string> messages_;
    Sink previous_;
    Level previous_level_;
};

}  // namespace factorgate::log
