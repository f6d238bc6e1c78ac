#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace spar {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
using CMat = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
using CVec = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

// Rank-4 tensor stored as an outer grid of dense state blocks.  The outer
// pair addresses (i,j) or (i,k); every block is n x n in the state indices
// (alpha, beta).  Blocks are kept exactly as supplied, unsymmetrized.
template <class Scalar>
struct BlockGrid {
  int outer_rows = 0;
  int outer_cols = 0;
  std::vector<Mat<Scalar>> blocks;  // row-major over (outer_row, outer_col)

  BlockGrid() = default;
  BlockGrid(int rows, int cols, int n)
      : outer_rows(rows), outer_cols(cols),
        blocks(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols),
               Mat<Scalar>::Zero(n, n)) {}

  int block_dim() const { return blocks.empty() ? 0 : static_cast<int>(blocks.front().rows()); }

  Mat<Scalar>& operator()(int r, int c) {
    return blocks[static_cast<std::size_t>(r) * outer_cols + c];
  }
  const Mat<Scalar>& operator()(int r, int c) const {
    return blocks[static_cast<std::size_t>(r) * outer_cols + c];
  }
};

template <class Scalar>
bool same_shape(const BlockGrid<Scalar>& x, const BlockGrid<Scalar>& y) {
  if (x.outer_rows != y.outer_rows || x.outer_cols != y.outer_cols) return false;
  for (std::size_t b = 0; b < x.blocks.size(); ++b)
    if (x.blocks[b].rows() != y.blocks[b].rows() || x.blocks[b].cols() != y.blocks[b].cols())
      return false;
  return true;
}

template <class Scalar>
Scalar max_abs_entry(const BlockGrid<Scalar>& g) {
  Scalar m = Scalar(0);
  for (const auto& blk : g.blocks)
    if (blk.size() > 0) m = std::max(m, blk.cwiseAbs().maxCoeff());
  return m;
}

}  // namespace spar
