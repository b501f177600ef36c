#include "clincascade/error.hpp"

#include <utility>

namespace clincascade {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::schema: return "schema";
        case ErrorKind::validation: return "validation";
        case ErrorKind::empty_result: return "empty_result";
        case ErrorKind::io: return "io";
        case ErrorKind::backend: return "backend";
    }
    return "unknown";
}

Error::Error(ErrorKind kind, std::string module, std::string operation, const std::string& message,
             std::string hint)
    : std::runtime_error(module + "::" + operation + ": " + message),
      kind_(kind),
      module_(std::move(module)),
      operation_(std::move(operation)),
      hint_(std::move(hint)) {}

}  // namespace clincascade
