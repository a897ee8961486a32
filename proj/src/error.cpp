#include "dwiplan/error.hpp"

namespace dwiplan {

const char* errc_name(errc c) {
    switch (c) {
    case errc::invalid_argument:      return "invalid-argument";
    case errc::geometry_mismatch:     return "geometry-mismatch";
    case errc::bins_mismatch:         return "bins-mismatch";
    case errc::insufficient_data:     return "insufficient-data";
    case errc::empty_roi:             return "empty-roi";
    case errc::empty_mask:            return "empty-mask";
    case errc::empty_slice:           return "empty-slice";
    case errc::infeasible_selection:  return "infeasible-selection";
    case errc::infeasible_plan:       return "infeasible-plan";
    case errc::sampling_failed:       return "sampling-failed";
    case errc::tip_outside:           return "tip-outside";
    case errc::invalid_signal:        return "invalid-signal";
    case errc::invalid_spec:          return "invalid-spec";
    case errc::degenerate_x:          return "degenerate-x";
    case errc::undefined_correlation: return "undefined-correlation";
    case errc::empty_comparison:      return "empty-comparison";
    case errc::unit_error:            return "unit-error";
    case errc::format_error:          return "format-error";
    case errc::io_error:              return "io-error";
    }
    return "unknown";
}

int errc_exit_code(errc c) {
    switch (c) {
    case errc::infeasible_selection:
    case errc::infeasible_plan:
    case errc::sampling_failed:
        return 4; // constraints unsatisfiable on valid data
    case errc::invalid_argument:
    case errc::invalid_spec:
        return 2; // usage / configuration
    default:
        return 3; // malformed or inconsistent data
    }
}

} // namespace dwiplan
