#pragma once

#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>

namespace bellfam {

/// Work refused because it exceeds a configured enumeration/size cap.
struct resource_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Family construction could not reach a zero classical bound.
struct construction_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Analytic matrix elements requested at an angle where a ratio s/c^- is undefined.
struct singular_angle_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// No finite detection threshold exists for the given contributions.
struct no_threshold_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// requested > 0 wins; otherwise BELLFAM_THREADS, otherwise hardware concurrency.
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("BELLFAM_THREADS")) {
        const int parsed = std::atoi(env);
        if (parsed > 0) return parsed;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

} // namespace bellfam
