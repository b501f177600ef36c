#pragma once

#include <stdexcept>
#include <string>

namespace clincascade {

enum class ErrorKind {
    schema,
    validation,
    empty_result,
    io,
    backend,
};

const char* to_string(ErrorKind kind) noexcept;

/// Error raised by every toolkit operation.
///
/// Carries the module and operation that failed plus an optional remediation
/// hint, so the CLI can surface a machine-readable error without parsing the
/// message text.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string module, std::string operation, const std::string& message,
          std::string hint = {});

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& module() const noexcept { return module_; }
    const std::string& operation() const noexcept { return operation_; }
    const std::string& hint() const noexcept { return hint_; }

private:
    ErrorKind kind_;
    std::string module_;
    std::string operation_;
    std::string hint_;
};

}  // namespace clincascade
