#pragma once

#include <atomic>
#include <iostream>
#include <mutex>
#include <string_view>

namespace arma_online::log {

inline std::atomic<bool>& enabled() {
    static std::atomic<bool> on{true};
    return on;
}

inline void warn(std::string_view msg) {
    if (!enabled().load(std::memory_order_relaxed)) return;
    static std::mutex mu;
    std::lock_guard lock(mu);
    std::cerr << "warning: " << msg << '\n';
}

inline void note(std::string_view msg) {
    if (!enabled().load(std::memory_order_relaxed)) return;
    static std::mutex mu;
    std::lock_guard lock(mu);
    std::cerr << "note: " << msg << '\n';
}

/// Silences warnings for the lifetime of the guard (used by tests and benches).
class Quiet {
public:
    Quiet() : prev_(enabled().exchange(false)) {}
    ~Quiet() { enabled().store(prev_); }
    Quiet(const Quiet&) = delete;
    Quiet& operator=(const Quiet&) = delete;

private:
    bool prev_;
};

}  // namespace arma_online::log
