#include "semcom/error.hpp"

namespace semcom {

Error::Error(std::string module, const std::string& message)
    : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

}  // namespace semcom
