#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace pebo {

/// Writes a comma-separated table with a fixed header. Values print with
/// "%.17g" so identical runs are byte-identical; NaN prints as "nan"
/// (plot-side row filters rely on it).
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& rows);

std::string format_double(double v);

}  // namespace pebo
