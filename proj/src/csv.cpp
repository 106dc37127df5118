#include "sigman/csv.hpp"

#include "sigman/error.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <fstream>

namespace sigman {

void write_text_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
    body(os);
    os.flush();
    if (!os) throw std::runtime_error(fmt::format("write to '{}' failed", path.string()));
}

void write_fit_table(std::ostream& os, const std::vector<NamedFit>& fits) {
    os << "method,drive_mhz,T_us,r,T_err,r_err,residual_rms,converged\n";
    for (const auto& f : fits) {
        fmt::print(os, "{},{},{},{},{},{},{},{}\n", f.method, f.drive_mhz, f.fit.T_us, f.fit.r,
                   f.fit.T_err(), f.fit.r_err(), f.fit.residual_rms, f.fit.converged ? 1 : 0);
    }
}

void write_method_curves_csv(std::ostream& os, const MethodCurves& c) {
    os << "tau1_us,R,neg_sigma2,neg_sigma3\n";
    for (std::size_t j = 0; j < c.ramsey.t.size(); ++j) {
        fmt::print(os, "{},{},{},{}\n", c.ramsey.t[j], c.ramsey.y[j], c.sigma2.y[j], c.sigma3.y[j]);
    }
}

}  // namespace sigman
