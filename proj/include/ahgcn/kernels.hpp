#pragma once

// Data-parallel numeric kernels. Every kernel in `ahgcn::kernels` has a
// straightforward serial counterpart in `ahgcn::kernels::reference` that the
// tests and benchmarks compare against.
//
// Parallel kernels split work over output rows (or independent maps) only, so
// the per-element accumulation order never depends on the thread count and
// results are reproducible run to run.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ahgcn/matrix.hpp"

namespace ahgcn::kernels {

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A^T * B
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// C = A * B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// Applies a block-diagonal operator: rows [offset_b, offset_b + n_b) of the
// result are ops[b] * h[offset_b .. offset_b + n_b). With `transpose` the
// blocks are applied as ops[b]^T.
Matrix block_apply(std::span<const Matrix> ops, const Matrix& h, bool transpose = false);

// Layout of one feature map handed to the reduce/pool kernel.
struct MapView {
    std::span<const double> values;  // (channel, row, col)
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
};

// Output of the reduce/pool kernel for one map.
struct PooledMap {
    std::vector<double> pooled;          // (reduced_channel, grid_row, grid_col)
    std::vector<std::uint32_t> argmax;   // spatial index row * width + col per pooled entry
};

// Pool windows are ceil(H/grid) x ceil(W/grid) with stride equal to the window.
// Throws if that tiling leaves an empty grid cell.
std::size_t pool_window(std::size_t extent, std::size_t grid);

// 1x1 channel reduction (weight: C x R, bias: 1 x R) followed by max pooling
// to a grid x grid raster. Ties in a window go to the first position in
// row-major order.
PooledMap reduce_pool(const MapView& map, const Matrix& weight, const Matrix& bias,
                      std::size_t grid);

// reduce_pool over independent maps, parallel across maps.
std::vector<PooledMap> reduce_pool_batch(std::span<const MapView> maps, const Matrix& weight,
                                         const Matrix& bias, std::size_t grid);

namespace reference {

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix block_apply(std::span<const Matrix> ops, const Matrix& h, bool transpose = false);
PooledMap reduce_pool(const MapView& map, const Matrix& weight, const Matrix& bias,
                      std::size_t grid);

}  // namespace reference

// Number of threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace ahgcn::kernels
