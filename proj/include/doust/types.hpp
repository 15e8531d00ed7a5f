#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace doust {

/// Row-major so that a batch row is one contiguous sample.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid shapes, hyperparameters or option combinations.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of a closed-form expression.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed or schema-violating input data.
class DatasetError : public Error {
public:
    using Error::Error;
};

}  // namespace doust
