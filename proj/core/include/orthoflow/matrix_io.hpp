#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>

namespace ortho {

// Fixture format: first line "rows cols", then one line per row of
// space-separated decimals written with 17 significant digits (round-trip
// exact for doubles).
Eigen::MatrixXd read_matrix_text(const std::string& path);
Eigen::MatrixXd read_matrix_text(std::istream& in, const std::string& label);
void write_matrix_text(const std::string& path, const Eigen::MatrixXd& m);
void write_matrix_text(std::ostream& out, const Eigen::MatrixXd& m);

// %.17g rendering used for every float the artifact serializes.
std::string format_double(double v);

}  // namespace ortho
