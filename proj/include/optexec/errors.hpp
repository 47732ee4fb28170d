#pragma once

#include <stdexcept>
#include <string>

namespace optexec {

/// Invalid or inconsistent configuration (bad parameter, unknown key, CFL violation, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the representable range of a model primitive.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Failure inside the numerical scheme; carries the time level when known.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, int time_level = -1)
        : std::runtime_error(time_level >= 0
                                 ? what + " (time level " + std::to_string(time_level) + ")"
                                 : what),
          time_level_(time_level) {}

    int time_level() const noexcept { return time_level_; }

private:
    int time_level_;
};

}  // namespace optexec
