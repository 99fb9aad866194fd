#pragma once

#include <stdexcept>
#include <string>
#include <vector>
#include <cstdint>

namespace sfde {

/// Base class for all failures raised by this library beyond ordinary
/// precondition violations (those use std::invalid_argument / std::domain_error).
class error : public std::runtime_error {
  public:
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// A matrix that must be positive definite failed its Cholesky pivot check.
class not_positive_definite_error : public error {
  public:
    not_positive_definite_error(const std::string& what, int pivot_index, double pivot_value)
        : error(what), pivot_index(pivot_index), pivot_value(pivot_value) {}
    int pivot_index;
    double pivot_value;
};

/// The model violated one of its contracts (non-PD diffusion, non-finite output).
class model_violation_error : public error {
  public:
    using error::error;
};

/// Euler-Maruyama state became non-finite; `time` is where it happened.
class simulation_diverged_error : public error {
  public:
    simulation_diverged_error(const std::string& what, double time) : error(what), time(time) {}
    double time;
};

/// Every contrast evaluation the optimizer attempted was non-finite.
class optimization_failed_error : public error {
  public:
    using error::error;
};

/// A Fisher information block is not positive definite.
class fisher_not_pd_error : public error {
  public:
    using error::error;
};

/// More than the tolerated fraction of Monte Carlo replications failed.
class degenerate_experiment_error : public error {
  public:
    degenerate_experiment_error(const std::string& what, std::vector<std::uint64_t> seeds)
        : error(what), failing_seeds(std::move(seeds)) {}
    std::vector<std::uint64_t> failing_seeds;
};

/// Contrast or similar accumulation overflowed to a non-finite value.
class non_finite_error : public error {
  public:
    using error::error;
};

} // namespace sfde
