#pragma once

#include <stdexcept>
#include <string>

namespace paneldml {

// Every failure raised by the library derives from Error. The three middle
// classes map onto the CLI exit codes (config = 2, data = 3, numerical = 4).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// -- data errors ---------------------------------------------------------

class MissingColumn : public DataError {
public:
    explicit MissingColumn(const std::string& name)
        : DataError("missing column '" + name + "'"), column(name) {}
    std::string column;
};

class NonNumericCell : public DataError {
public:
    NonNumericCell(std::size_t row, const std::string& col, const std::string& cell)
        : DataError("non-numeric value '" + cell + "' in column '" + col + "' at data row " +
                    std::to_string(row)),
          row(row), column(col) {}
    std::size_t row;
    std::string column;
};

class DuplicateKey : public DataError {
public:
    DuplicateKey(const std::string& panel, long long time)
        : DataError("duplicate observation for panel '" + panel + "' at time " +
                    std::to_string(time)),
          panel_id(panel), time_id(time) {}
    std::string panel_id;
    long long time_id;
};

class SingletonSubject : public DataError {
public:
    explicit SingletonSubject(const std::string& panel)
        : DataError("panel '" + panel + "' has fewer than 2 observations"), panel_id(panel) {}
    std::string panel_id;
};

class ClusterSplitsSubject : public DataError {
public:
    explicit ClusterSplitsSubject(const std::string& panel)
        : DataError("panel '" + panel + "' spans more than one cluster"), panel_id(panel) {}
    std::string panel_id;
};

class GapInSeries : public DataError {
public:
    GapInSeries(const std::string& panel, long long from, long long to)
        : DataError("panel '" + panel + "' jumps from time " + std::to_string(from) + " to " +
                    std::to_string(to) + " (strict gap mode)"),
          panel_id(panel) {}
    std::string panel_id;
};

class DimensionMismatch : public DataError {
public:
    using DataError::DataError;
};

class NonFiniteInput : public DataError {
public:
    using DataError::DataError;
};

class TooManyFolds : public ConfigError {
public:
    TooManyFolds(long k, long n_subjects)
        : ConfigError("cannot split " + std::to_string(n_subjects) + " subjects into " +
                      std::to_string(k) + " folds") {}
};

class EmptyGrid : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// -- numerical errors ----------------------------------------------------

class DegenerateDesign : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class SingleCluster : public NumericalError {
public:
    SingleCluster() : NumericalError("cluster-robust variance needs at least 2 clusters") {}
};

class LearnerFailure : public NumericalError {
public:
    LearnerFailure(std::size_t fold, const std::string& nuisance, const std::string& what)
        : NumericalError("learner for " + nuisance + " failed on fold " + std::to_string(fold + 1) +
                         ": " + what),
          fold(fold), nuisance(nuisance) {}
    std::size_t fold;
    std::string nuisance;
};

class MissingResult : public IoError {
public:
    using IoError::IoError;
};

}  // namespace paneldml
