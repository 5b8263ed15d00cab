#pragma once

#include <Eigen/Core>

namespace mmbeam {

// All dense numeric data in the library is a row-major 2-D matrix.
// Row vectors are [1 x c], column vectors [r x 1].
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Mat<T> row_from(std::initializer_list<T> vals) {
  Mat<T> m(1, static_cast<Eigen::Index>(vals.size()));
  Eigen::Index j = 0;
  for (T v : vals) m(0, j++) = v;
  return m;
}

}  // namespace mmbeam
