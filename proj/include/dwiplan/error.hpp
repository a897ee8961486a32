#pragma once

#include <stdexcept>
#include <string>

namespace dwiplan {

// Error codes double as machine-readable identifiers: the CLI emits them in a
// JSON payload on stderr and maps them to exit codes (usage=2, data=3,
// infeasible=4).
enum class errc {
    invalid_argument,
    geometry_mismatch,
    bins_mismatch,
    insufficient_data,
    empty_roi,
    empty_mask,
    empty_slice,
    infeasible_selection,
    infeasible_plan,
    sampling_failed,
    tip_outside,
    invalid_signal,
    invalid_spec,
    degenerate_x,
    undefined_correlation,
    empty_comparison,
    unit_error,
    format_error,
    io_error,
};

const char* errc_name(errc c);

// Which exit code class an error belongs to when surfaced by the CLI.
int errc_exit_code(errc c);

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& msg)
        : std::runtime_error(msg), code_(code) {}

    errc code() const { return code_; }
    const char* code_name() const { return errc_name(code_); }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) {
    throw Error(code, msg);
}

} // namespace dwiplan
