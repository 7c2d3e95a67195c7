#pragma once

#include <stdexcept>
#include <string>

namespace raptor {

// Base class for everything this library throws.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape / precondition violations: mismatched dims, invalid config values.
class StructuralError : public Error {
public:
    explicit StructuralError(const std::string& msg) : Error(msg) {}
};

// Numerical failures: diverged integration, symmetry violations.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& msg) : Error(msg) {}
};

// Dissimilarity could not be evaluated (e.g. every patch rejected).
class MetricUndefinedError : public Error {
public:
    explicit MetricUndefinedError(const std::string& msg) : Error(msg) {}
};

// Optimizer could not make progress at the configured step size.
class StepSizeError : public Error {
public:
    explicit StepSizeError(const std::string& msg) : Error(msg) {}
};

// File parsing / serialization failures.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Input path does not exist; the CLI maps this to exit code 2.
class FileNotFoundError : public IoError {
public:
    explicit FileNotFoundError(const std::string& path)
        : IoError("input file not found: " + path), path_(path) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

} // namespace raptor
