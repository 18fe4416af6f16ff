#pragma once

#include <stdexcept>
#include <string>

namespace fedad {

// Error categories map 1:1 to CLI exit codes; keep them stable.
enum class ErrorCategory { Config, Io, Data, Shape, Numeric };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error(ErrorCategory::Config, m) {}
};
struct IoError : Error {
    explicit IoError(const std::string& m) : Error(ErrorCategory::Io, m) {}
};
struct DataError : Error {
    explicit DataError(const std::string& m) : Error(ErrorCategory::Data, m) {}
};
struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error(ErrorCategory::Shape, m) {}
};
struct NumericError : Error {
    explicit NumericError(const std::string& m) : Error(ErrorCategory::Numeric, m) {}
};

const char* category_name(ErrorCategory c);
int category_exit_code(ErrorCategory c);

} // namespace fedad
