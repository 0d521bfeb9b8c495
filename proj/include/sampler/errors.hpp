#pragma once

#include <stdexcept>
#include <string>

namespace sampler {

// Base of every error raised by the library. `exit_code()` follows the CLI
// contract: 1 configuration/usage, 2 infeasible or singular, 3 numerical.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 3; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 1; }
};

class DimensionMismatch : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class SingularFim : public Error {
public:
    explicit SingularFim(const std::string& what, long theta_index = -1)
        : Error(what), theta_index_(theta_index) {}
    long theta_index() const noexcept { return theta_index_; }
    int exit_code() const noexcept override { return 2; }

private:
    long theta_index_;
};

// No point of the feasible polytope gives a positive definite FIM.
class InfeasibleStart : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

// Per-parameter caps cannot be met within the budget. `violation` is the
// smallest achievable relative cap excess max_p (mu_p - cap_p) / cap_p.
class Infeasible : public Error {
public:
    Infeasible(const std::string& what, double violation)
        : Error(what), violation_(violation) {}
    double violation() const noexcept { return violation_; }
    int exit_code() const noexcept override { return 2; }

private:
    double violation_;
};

class MaxIterations : public Error {
public:
    using Error::Error;
};

class TooLarge : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class AllSingular : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

class EmptyGrid : public ConfigError {
public:
    using ConfigError::ConfigError;
};

}  // namespace sampler
