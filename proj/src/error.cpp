#include "cmc/error.hpp"

namespace cmc {

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
    std::string msg = "dataset validation failed (" + std::to_string(problems.size()) + " problem";
    msg += problems.size() == 1 ? ")" : "s)";
    for (const auto& p : problems) {
        msg += "\n  - ";
        msg += p;
    }
    return msg;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> problems)
    : Error(join_problems(problems)), problems_(std::move(problems)) {}

}  // namespace cmc
