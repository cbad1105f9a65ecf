#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace cmc {

/// Selects between the OpenMP kernel and its serial reference loop. Both
/// paths produce bit-identical results; the serial one is kept for tests
/// and benchmarks.
enum class Execution { serial, parallel };

/// Caps the OpenMP worker count (0 leaves the runtime default).
void set_max_threads(int n);

/// Number of OpenMP workers a parallel region would use.
int max_threads();

/// Runs body(i) for i in [0, n). Each index must write only its own output
/// slot. The first exception (lowest index) is rethrown after the loop.
template <typename Body>
void for_each_index(std::size_t n, Execution exec, Body&& body) {
    if (exec == Execution::serial) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace cmc
