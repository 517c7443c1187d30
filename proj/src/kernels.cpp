#include "ahgcn/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ahgcn::kernels {

namespace {

void check_inner(std::size_t lhs, std::size_t rhs, const char* op) {
    if (lhs != rhs) {
        throw std::invalid_argument(std::string(op) + ": inner dimensions differ (" +
                                    std::to_string(lhs) + " vs " + std::to_string(rhs) + ")");
    }
}

using Index = std::ptrdiff_t;

std::vector<std::size_t> block_offsets(std::span<const Matrix> ops, const Matrix& h) {
    std::vector<std::size_t> offsets(ops.size() + 1, 0);
    for (std::size_t b = 0; b < ops.size(); ++b) {
        if (ops[b].rows() != ops[b].cols()) {
            throw std::invalid_argument("block_apply: operator blocks must be square");
        }
        offsets[b + 1] = offsets[b] + ops[b].rows();
    }
    if (offsets.back() != h.rows()) {
        throw std::invalid_argument("block_apply: blocks cover " + std::to_string(offsets.back()) +
                                    " rows, input has " + std::to_string(h.rows()));
    }
    return offsets;
}

void check_map(const MapView& map, const Matrix& weight, const Matrix& bias) {
    if (map.values.size() != map.channels * map.height * map.width) {
        throw std::invalid_argument("reduce_pool: map buffer does not match its shape");
    }
    if (weight.rows() != map.channels) {
        throw std::invalid_argument("reduce_pool: map has " + std::to_string(map.channels) +
                                    " channels, reduce weight expects " +
                                    std::to_string(weight.rows()));
    }
    require_shape(bias, 1, weight.cols(), "reduce_pool bias");
}

// Max pooling of a reduced (R, H, W) buffer.
PooledMap pool(std::span<const double> reduced, std::size_t channels, std::size_t height,
               std::size_t width, std::size_t grid) {
    const std::size_t wy = pool_window(height, grid);
    const std::size_t wx = pool_window(width, grid);
    PooledMap out;
    out.pooled.resize(channels * grid * grid);
    out.argmax.resize(channels * grid * grid);
    for (std::size_t r = 0; r < channels; ++r) {
        const double* plane = reduced.data() + r * height * width;
        for (std::size_t gy = 0; gy < grid; ++gy) {
            const std::size_t y1 = std::min(height, (gy + 1) * wy);
            for (std::size_t gx = 0; gx < grid; ++gx) {
                const std::size_t x1 = std::min(width, (gx + 1) * wx);
                std::size_t best = gy * wy * width + gx * wx;
                double best_value = plane[best];
                for (std::size_t y = gy * wy; y < y1; ++y) {
                    for (std::size_t x = gx * wx; x < x1; ++x) {
                        const std::size_t idx = y * width + x;
                        if (plane[idx] > best_value) {
                            best_value = plane[idx];
                            best = idx;
                        }
                    }
                }
                const std::size_t cell = (r * grid + gy) * grid + gx;
                out.pooled[cell] = best_value;
                out.argmax[cell] = static_cast<std::uint32_t>(best);
            }
        }
    }
    return out;
}

constexpr std::size_t kTileRows = 4, kTileCols = 8;

typedef double v4d __attribute__((vector_size(32)));

// One 4 x 8 tile of C over the full inner dimension. Every entry is summed
// over p in order starting from zero, so results match the reference kernel
// bit for bit whatever instruction set the tile is compiled for.
inline __attribute__((always_inline)) void tile_4x8(const double* a, std::size_t si, std::size_t sp,
                                                    const double* panel, std::size_t k, double* c,
                                                    std::size_t n) {
    v4d acc[kTileRows][2] = {};
    for (std::size_t p = 0; p < k; ++p) {
        v4d b0, b1;
        std::memcpy(&b0, panel + p * kTileCols, sizeof b0);
        std::memcpy(&b1, panel + p * kTileCols + 4, sizeof b1);
        const double* ap = a + p * sp;
        for (std::size_t r = 0; r < kTileRows; ++r) {
            const v4d av = v4d{} + ap[r * si];
            acc[r][0] += av * b0;
            acc[r][1] += av * b1;
        }
    }
    for (std::size_t r = 0; r < kTileRows; ++r) {
        std::memcpy(c + r * n, &acc[r][0], sizeof(v4d));
        std::memcpy(c + r * n + 4, &acc[r][1], sizeof(v4d));
    }
}

using TileRow = void (*)(const double*, std::size_t, std::size_t, const double*, std::size_t, double*,
                         std::size_t, std::size_t);

// All full tiles of one block of four rows.
void tile_row_generic(const double* a, std::size_t si, std::size_t sp, const double* panels, std::size_t k,
                      double* c, std::size_t n, std::size_t full_cols) {
    for (std::size_t j0 = 0; j0 < full_cols; j0 += kTileCols) tile_4x8(a, si, sp, panels + j0 * k, k, c + j0, n);
}

// No FMA: fused rounding would break agreement with the reference.
__attribute__((target("avx2"))) void tile_row_avx2(const double* a, std::size_t si, std::size_t sp,
                                                   const double* panels, std::size_t k, double* c,
                                                   std::size_t n, std::size_t full_cols) {
    for (std::size_t j0 = 0; j0 < full_cols; j0 += kTileCols) tile_4x8(a, si, sp, panels + j0 * k, k, c + j0, n);
}

TileRow select_tile_row() {
#if defined(__x86_64__) || defined(__i386__)
    if (__builtin_cpu_supports("avx2")) return tile_row_avx2;
#endif
    return tile_row_generic;
}

const TileRow tile_row = select_tile_row();

// C (m x n) = A B with A(i, p) = a[i * si + p * sp].
void gemm(const double* a, std::size_t si, std::size_t sp, const double* b, double* c, std::size_t m,
          std::size_t k, std::size_t n) {
    const std::size_t full_cols = n - n % kTileCols;
    // B's full column panels, each stored k x kTileCols contiguously.
    std::vector<double> panels(full_cols * k);
    for (std::size_t j0 = 0; j0 < full_cols; j0 += kTileCols) {
        double* dst = panels.data() + j0 * k;
        for (std::size_t p = 0; p < k; ++p) {
            for (std::size_t q = 0; q < kTileCols; ++q) dst[p * kTileCols + q] = b[p * n + j0 + q];
        }
    }
    const Index blocks = static_cast<Index>((m + kTileRows - 1) / kTileRows);
#pragma omp parallel for schedule(static)
    for (Index blk = 0; blk < blocks; ++blk) {
        const std::size_t i0 = static_cast<std::size_t>(blk) * kTileRows;
        const std::size_t rows = std::min(kTileRows, m - i0);
        std::size_t j_start = 0;
        if (rows == kTileRows) {
            tile_row(a + i0 * si, si, sp, panels.data(), k, c + i0 * n, n, full_cols);
            j_start = full_cols;
        }
        if (j_start == n) continue;
        for (std::size_t r = 0; r < rows; ++r) {
            double* crow = c + (i0 + r) * n;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = a[(i0 + r) * si + p * sp];
                const double* brow = b + p * n;
                for (std::size_t j = j_start; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    }
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

std::size_t pool_window(std::size_t extent, std::size_t grid) {
    if (grid == 0 || extent < grid) {
        throw std::invalid_argument("pool: extent " + std::to_string(extent) +
                                    " is smaller than the pool grid " + std::to_string(grid));
    }
    const std::size_t window = (extent + grid - 1) / grid;
    if ((grid - 1) * window >= extent) {
        throw std::invalid_argument("pool: extent " + std::to_string(extent) +
                                    " cannot be tiled into a " + std::to_string(grid) +
                                    "-cell grid with window " + std::to_string(window));
    }
    return window;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_inner(a.cols(), b.rows(), "matmul");
    Matrix c(a.rows(), b.cols());
    gemm(a.data(), a.cols(), 1, b.data(), c.data(), a.rows(), a.cols(), b.cols());
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    check_inner(a.rows(), b.rows(), "matmul_tn");
    Matrix c(a.cols(), b.cols());
    gemm(a.data(), 1, a.cols(), b.data(), c.data(), a.cols(), a.rows(), b.cols());
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    check_inner(a.cols(), b.cols(), "matmul_nt");
    const Matrix bt = b.transposed();
    Matrix c(a.rows(), b.rows());
    gemm(a.data(), a.cols(), 1, bt.data(), c.data(), a.rows(), a.cols(), bt.cols());
    return c;
}

Matrix block_apply(std::span<const Matrix> ops, const Matrix& h, bool transpose) {
    const auto offsets = block_offsets(ops, h);
    const std::size_t d = h.cols();
    Matrix out(h.rows(), d);
    const Index total = static_cast<Index>(h.rows());
#pragma omp parallel for schedule(static)
    for (Index row = 0; row < total; ++row) {
        std::size_t b = 0;
        while (offsets[b + 1] <= static_cast<std::size_t>(row)) ++b;
        const Matrix& op = ops[b];
        const std::size_t base = offsets[b];
        const std::size_t local = static_cast<std::size_t>(row) - base;
        double* orow = out.data() + row * d;
        for (std::size_t q = 0; q < op.rows(); ++q) {
            const double w = transpose ? op(q, local) : op(local, q);
            if (w == 0.0) continue;
            const double* hrow = h.data() + (base + q) * d;
            for (std::size_t j = 0; j < d; ++j) orow[j] += w * hrow[j];
        }
    }
    return out;
}

PooledMap reduce_pool(const MapView& map, const Matrix& weight, const Matrix& bias,
                      std::size_t grid) {
    check_map(map, weight, bias);
    const std::size_t reduced_channels = weight.cols();
    const std::size_t plane = map.height * map.width;
    std::vector<double> reduced(reduced_channels * plane);
    for (std::size_t r = 0; r < reduced_channels; ++r) {
        std::fill_n(reduced.data() + r * plane, plane, bias[r]);
    }
    for (std::size_t c = 0; c < map.channels; ++c) {
        const double* in = map.values.data() + c * plane;
        for (std::size_t r = 0; r < reduced_channels; ++r) {
            const double w = weight(c, r);
            double* out = reduced.data() + r * plane;
            for (std::size_t i = 0; i < plane; ++i) out[i] += w * in[i];
        }
    }
    return pool(reduced, reduced_channels, map.height, map.width, grid);
}

std::vector<PooledMap> reduce_pool_batch(std::span<const MapView> maps, const Matrix& weight,
                                         const Matrix& bias, std::size_t grid) {
    for (const auto& map : maps) check_map(map, weight, bias);
    std::vector<PooledMap> out(maps.size());
#pragma omp parallel for schedule(dynamic)
    for (Index i = 0; i < static_cast<Index>(maps.size()); ++i) {
        out[i] = reduce_pool(maps[i], weight, bias, grid);
    }
    return out;
}

namespace reference {

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_inner(a.cols(), b.rows(), "matmul");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < a.cols(); ++p) acc += a(i, p) * b(p, j);
            c(i, j) = acc;
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) { return matmul(a.transposed(), b); }

Matrix matmul_nt(const Matrix& a, const Matrix& b) { return matmul(a, b.transposed()); }

Matrix block_apply(std::span<const Matrix> ops, const Matrix& h, bool transpose) {
    const auto offsets = block_offsets(ops, h);
    Matrix out(h.rows(), h.cols());
    for (std::size_t b = 0; b < ops.size(); ++b) {
        const Matrix op = transpose ? ops[b].transposed() : ops[b];
        for (std::size_t i = 0; i < op.rows(); ++i) {
            for (std::size_t j = 0; j < h.cols(); ++j) {
                double acc = 0.0;
                for (std::size_t q = 0; q < op.cols(); ++q) {
                    acc += op(i, q) * h(offsets[b] + q, j);
                }
                out(offsets[b] + i, j) = acc;
            }
        }
    }
    return out;
}

PooledMap reduce_pool(const MapView& map, const Matrix& weight, const Matrix& bias,
                      std::size_t grid) {
    check_map(map, weight, bias);
    const std::size_t reduced_channels = weight.cols();
    const std::size_t plane = map.height * map.width;
    std::vector<double> reduced(reduced_channels * plane);
    for (std::size_t r = 0; r < reduced_channels; ++r) {
        for (std::size_t pos = 0; pos < plane; ++pos) {
            double acc = bias[r];
            for (std::size_t c = 0; c < map.channels; ++c) {
                acc += weight(c, r) * map.values[c * plane + pos];
            }
            reduced[r * plane + pos] = acc;
        }
    }
    return pool(reduced, reduced_channels, map.height, map.width, grid);
}

}  // namespace reference

}  // namespace ahgcn::kernels
