#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seldr/errors.hpp"

namespace seldr {

// A selection-model dataset. x carries a leading intercept column; z is the
// selection design [x, excluded columns]. y is meaningful only where d = 1
// (NaN elsewhere by convention).
struct ObservationSet {
  Eigen::VectorXi d;
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  Eigen::MatrixXd z;
  std::vector<std::string> x_names;
  std::vector<std::string> z_names;

  Eigen::Index n() const { return d.size(); }
  Eigen::Index k_x() const { return x.cols(); }
  Eigen::Index k_z() const { return z.cols(); }

  void validate() const;
};

inline void ObservationSet::validate() const {
  const Eigen::Index rows = n();
  if (rows == 0) throw_error(errc::empty_sample, "dataset is empty");
  if (y.size() != rows || x.rows() != rows || z.rows() != rows) {
    throw_error(errc::schema, "dataset blocks have inconsistent row counts");
  }
  if (!x_names.empty() && static_cast<Eigen::Index>(x_names.size()) != x.cols()) {
    throw_error(errc::schema, "x_names does not match the X design");
  }
  if (!z_names.empty() && static_cast<Eigen::Index>(z_names.size()) != z.cols()) {
    throw_error(errc::schema, "z_names does not match the Z design");
  }
  long selected = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (d[i] != 0 && d[i] != 1) throw_error(errc::malformed_input, "d must be 0/1");
    if (d[i] == 1) {
      ++selected;
      if (!std::isfinite(y[i])) {
        throw_error(errc::malformed_input,
                    "outcome missing or non-finite for a selected row " + std::to_string(i));
      }
    }
  }
  if (selected == 0 || selected == rows) {
    throw_error(errc::malformed_input, "selection indicator is degenerate (all 0 or all 1)");
  }
}

}  // namespace seldr
