#pragma once

#include "sigman/estimation.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace sigman {

/// Opens `path` for writing (binary, truncating) and hands the stream to `body`.
void write_text_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body);

struct NamedFit {
    std::string method;
    double drive_mhz = 0.0;
    FitResult fit;
};

/// Columns: method,drive_mhz,T_us,r,T_err,r_err,residual_rms,converged
void write_fit_table(std::ostream& os, const std::vector<NamedFit>& fits);

/// Columns: tau1_us,R,neg_sigma2,neg_sigma3
void write_method_curves_csv(std::ostream& os, const MethodCurves& c);

}  // namespace sigman
