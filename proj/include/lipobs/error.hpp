#pragma once

#include <stdexcept>
#include <string>

namespace lipobs {

// Numeric values double as CLI exit codes.
enum class ErrorCode : int {
    Ok = 0,
    InvalidInput = 1,
    Infeasible = 2,
    NumericalFailure = 3,
    SimulationBlowUp = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline Error invalid_input(const std::string& what) { return Error(ErrorCode::InvalidInput, what); }

}  // namespace lipobs
