#pragma once

#include <stdexcept>
#include <string>

namespace svecm {

/// Library error carrying a stable, machine-readable code (e.g. "panel.no_observations").
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    [[nodiscard]] const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

}  // namespace svecm
