#pragma once

#include <stdexcept>
#include <string>

namespace cascadelab {

// Error hierarchy used across the library. The CLI maps these to exit codes:
// ConfigError/ParseError -> 2, TrainingDivergenceError -> 3, IoError -> 4.

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class ParseError : public ConfigError {
public:
    explicit ParseError(const std::string& msg) : ConfigError(msg) {}
};

class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidDistributionError : public std::runtime_error {
public:
    explicit InvalidDistributionError(const std::string& msg) : std::runtime_error(msg) {}
};

class OutOfSupportError : public std::runtime_error {
public:
    explicit OutOfSupportError(const std::string& msg) : std::runtime_error(msg) {}
};

class TrainingDivergenceError : public std::runtime_error {
public:
    explicit TrainingDivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cascadelab
