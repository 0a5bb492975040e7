#pragma once

#include <stdexcept>
#include <string>

namespace tvx {

// Failure classes shared across the library. Each maps to a stable name and a
// distinct process exit code so the CLI can emit machine-readable error records.
enum class errc {
    config = 2,
    singular_point,
    parameter,
    out_of_range,
    degenerate_config,
    non_convergence,
    lattice_violation,
    collision_imminent,
    step_failure,
    invalid_initial_data,
    grid_too_coarse,
    eta_spec_invalid,
    core_unresolved,
    unstable_step,
    io,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::config: return "ConfigError";
        case errc::singular_point: return "SingularPoint";
        case errc::parameter: return "ParameterError";
        case errc::out_of_range: return "OutOfRange";
        case errc::degenerate_config: return "DegenerateConfig";
        case errc::non_convergence: return "NonConvergence";
        case errc::lattice_violation: return "LatticeViolation";
        case errc::collision_imminent: return "CollisionImminent";
        case errc::step_failure: return "StepFailure";
        case errc::invalid_initial_data: return "InvalidInitialData";
        case errc::grid_too_coarse: return "GridTooCoarse";
        case errc::eta_spec_invalid: return "EtaSpecInvalid";
        case errc::core_unresolved: return "CoreUnresolved";
        case errc::unstable_step: return "UnstableStep";
        case errc::io: return "IoError";
    }
    return "UnknownError";
}

class error : public std::runtime_error {
  public:
    error(errc c, const std::string& what) : std::runtime_error(what), code_(c) {}
    errc code() const { return code_; }
    const char* name() const { return errc_name(code_); }
    int exit_code() const { return static_cast<int>(code_); }

  private:
    errc code_;
};

[[noreturn]] inline void fail(errc c, const std::string& what) { throw error(c, what); }

}  // namespace tvx
