#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qos {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IntegrityError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class TransportError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace qos
