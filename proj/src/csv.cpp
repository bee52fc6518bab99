#include "pebo/csv.hpp"

#include "pebo/types.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace pebo {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& rows) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    for (size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << header[i];
    }
    out << '\n';
    for (long r = 0; r < rows.rows(); ++r) {
        for (long c = 0; c < rows.cols(); ++c) {
            if (c) out << ',';
            out << format_double(rows(r, c));
        }
        out << '\n';
    }
}

}  // namespace pebo
