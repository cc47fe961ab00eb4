#pragma once

#include <stdexcept>
#include <string>

namespace matchlab {

enum class errc {
  zero_mass,
  not_positive,
  empty_cell,
  out_of_domain,
  too_large,
  size_mismatch,
  mass_imbalance,
  problem_too_large,
  not_positive_weight,
  solver_diverged,
  regression_ill_conditioned,
  degenerate_design,
  config_invalid,
  io_failure,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::zero_mass: return "ZeroMass";
    case errc::not_positive: return "NotPositive";
    case errc::empty_cell: return "EmptyCell";
    case errc::out_of_domain: return "OutOfDomain";
    case errc::too_large: return "TooLarge";
    case errc::size_mismatch: return "SizeMismatch";
    case errc::mass_imbalance: return "MassImbalance";
    case errc::problem_too_large: return "ProblemTooLarge";
    case errc::not_positive_weight: return "NotPositiveWeight";
    case errc::solver_diverged: return "SolverDiverged";
    case errc::regression_ill_conditioned: return "RegressionIllConditioned";
    case errc::degenerate_design: return "DegenerateDesign";
    case errc::config_invalid: return "ConfigInvalid";
    case errc::io_failure: return "IoFailure";
  }
  return "UnknownError";
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

} // namespace matchlab
