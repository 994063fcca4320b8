#pragma once

// Error taxonomy shared by all modules. Every error derives from tdiff::Error
// so callers can catch the family or a specific kind.

#include <stdexcept>
#include <string>
#include <vector>

namespace tdiff {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Precondition on indices, sets or scalar arguments violated.
class DomainError : public Error {
public:
    using Error::Error;
};

// Bad or missing configuration (schema columns, fold counts, paths, constant predictors).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Dump file does not start with the expected magic/version.
class FormatError : public Error {
public:
    using Error::Error;
};

// Dump file is structurally inconsistent (truncated tensor, shape mismatch).
class CorruptionError : public Error {
public:
    using Error::Error;
};

// Words that could not be mapped onto model subwords.
class MappingError : public Error {
public:
    MappingError(const std::string& what, std::vector<int> words = {})
        : Error(what), words_(std::move(words)) {}
    const std::vector<int>& words() const noexcept { return words_; }

private:
    std::vector<int> words_;
};

class UnsupportedError : public Error {
public:
    using Error::Error;
};

// Rank deficiency and other linear-algebra failures.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, std::vector<std::string> columns = {})
        : Error(what), columns_(std::move(columns)) {}
    const std::vector<std::string>& columns() const noexcept { return columns_; }

private:
    std::vector<std::string> columns_;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> trace)
        : Error(what), trace_(std::move(trace)) {}
    const std::vector<double>& trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

// Caller broke an interface contract (mismatched lengths, columns, overlapping folds).
class ContractError : public Error {
public:
    using Error::Error;
};

class FoldError : public Error {
public:
    using Error::Error;
};

class EmptyReportError : public Error {
public:
    using Error::Error;
};

}  // namespace tdiff
