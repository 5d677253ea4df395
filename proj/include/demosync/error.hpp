#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace demosync {

// Domain error with a stable machine-readable code. The CLI renders these as
// "ERROR <code> <context>" on stderr and exits 1.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& context)
        : std::runtime_error(code + " " + context), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

}  // namespace demosync
