#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "apbf/particle_state.hpp"
#include "apbf/types.hpp"

namespace apbf {

/// Compressed neighbor lists. Neighbors of particle i occupy
/// indices[offsets[i] .. offsets[i+1]) in ascending order; i itself is
/// included. Lists are built once per substep against the positions current
/// at build time and reused for every solver iteration of that substep.
struct NeighborLists {
    std::vector<int> offsets;
    std::vector<int> indices;

    int count() const { return static_cast<int>(offsets.size()) - 1; }
    int begin(int i) const { return offsets[i]; }
    int end(int i) const { return offsets[i + 1]; }
    int size(int i) const { return offsets[i + 1] - offsets[i]; }
};

/// Uniform grid over an axis-aligned bounding box with cell size equal to the
/// smoothing length, rebuilt from scratch every substep via counting sort.
/// All queries run against the internally stored, cell-sorted point copy;
/// permutation() maps sorted slots back to pre-build indices. buildAndSort
/// reorders a ParticleSet by the same permutation so that afterwards particle
/// indices and sorted slots coincide.
template <class Scalar>
class UniformGrid {
public:
    // Cap on total cell count; a finite-but-exploded particle cloud trips
    // this before the cell table allocation does.
    static constexpr std::int64_t kMaxCells = std::int64_t(1) << 26;

    void build(const Mat3X<Scalar>& positions, Scalar h, Scalar padding) {
        if (!(h > Scalar(0))) {
            throw std::invalid_argument("grid cell size must be positive");
        }
        if (padding < Scalar(0)) {
            throw std::invalid_argument("grid padding must be non-negative");
        }
        h_ = h;
        h2_ = h * h;
        const int n = static_cast<int>(positions.cols());
        if (n == 0) {
            origin_.setZero();
            dims_.setOnes();
            cellStart_.assign(2, 0);
            perm_.clear();
            points_.resize(3, 0);
            return;
        }
        if (!positions.allFinite()) {
            for (int i = 0; i < n; ++i) {
                if (!positions.col(i).allFinite()) {
                    throw NumericalError("grid build", i, "non-finite position");
                }
            }
        }
        const Vec3<Scalar> lo = positions.rowwise().minCoeff();
        const Vec3<Scalar> hi = positions.rowwise().maxCoeff();
        origin_ = lo.array() - padding;
        const Vec3<Scalar> top = hi.array() + padding;
        std::int64_t cells = 1;
        for (int a = 0; a < 3; ++a) {
            const Scalar extent = top[a] - origin_[a];
            dims_[a] = std::max(1, static_cast<int>(std::floor(extent / h_)) + 1);
            cells *= dims_[a];
            if (cells > kMaxCells) {
                throw std::runtime_error("grid cell count exceeds limit; domain blew up");
            }
        }

        std::vector<int> cellOf(static_cast<size_t>(n));
        cellStart_.assign(static_cast<size_t>(cells) + 1, 0);
        for (int i = 0; i < n; ++i) {
            const int c = linearCell(cellCoord(positions.col(i)));
            cellOf[static_cast<size_t>(i)] = c;
            ++cellStart_[static_cast<size_t>(c) + 1];
        }
        for (size_t c = 1; c < cellStart_.size(); ++c) cellStart_[c] += cellStart_[c - 1];

        perm_.assign(static_cast<size_t>(n), 0);
        std::vector<int> cursor(cellStart_.begin(), cellStart_.end() - 1);
        for (int i = 0; i < n; ++i) {
            perm_[static_cast<size_t>(cursor[static_cast<size_t>(cellOf[static_cast<size_t>(i)])]++)] = i;
        }

        points_.resize(3, n);
        for (int k = 0; k < n; ++k) points_.col(k) = positions.col(perm_[static_cast<size_t>(k)]);
    }

    /// Build from the predicted positions and reorder the whole particle set
    /// into cell order, so sorted slots equal particle indices.
    void buildAndSort(ParticleSet<Scalar>& state, Scalar h, Scalar padding) {
        build(state.xStar, h, padding);
        state.applyPermutation(perm_);
    }

    int pointCount() const { return static_cast<int>(points_.cols()); }
    Scalar cellSize() const { return h_; }
    const Vec3<Scalar>& origin() const { return origin_; }
    const Eigen::Vector3i& dims() const { return dims_; }
    std::int64_t cellCount() const {
        return std::int64_t(dims_[0]) * dims_[1] * dims_[2];
    }
    const std::vector<int>& permutation() const { return perm_; }
    const Mat3X<Scalar>& sortedPoints() const { return points_; }

    template <class Derived>
    Eigen::Vector3i cellCoord(const Eigen::MatrixBase<Derived>& p) const {
        Eigen::Vector3i c;
        for (int a = 0; a < 3; ++a) {
            int v = static_cast<int>(std::floor((p[a] - origin_[a]) / h_));
            c[a] = std::min(std::max(v, 0), dims_[a] - 1);
        }
        return c;
    }

    int particlesInCell(const Eigen::Vector3i& c) const {
        const int id = linearCell(c);
        return cellStart_[static_cast<size_t>(id) + 1] - cellStart_[static_cast<size_t>(id)];
    }

    /// Visit every stored point strictly within the smoothing radius of p, in
    /// ascending slot order. fn receives (slot, squaredDistance). The query
    /// point itself is visited when it is one of the stored points.
    template <class Derived, class F>
    void forEachNeighbor(const Eigen::MatrixBase<Derived>& p, F&& fn) const {
        Eigen::Vector3i lo, hi;
        for (int a = 0; a < 3; ++a) {
            const int c = static_cast<int>(std::floor((p[a] - origin_[a]) / h_));
            lo[a] = std::max(c - 1, 0);
            hi[a] = std::min(c + 1, dims_[a] - 1);
            if (lo[a] > hi[a]) return;
        }
        const Vec3<Scalar> q = p;
        // Cells adjacent along x are contiguous in the sorted order, so each
        // (z, y) row contributes one contiguous slot run.
        for (int cz = lo[2]; cz <= hi[2]; ++cz) {
            for (int cy = lo[1]; cy <= hi[1]; ++cy) {
                const std::int64_t rowBase = (std::int64_t(cz) * dims_[1] + cy) * dims_[0];
                const int b = cellStart_[static_cast<size_t>(rowBase + lo[0])];
                const int e = cellStart_[static_cast<size_t>(rowBase + hi[0]) + 1];
                for (int k = b; k < e; ++k) {
                    const Scalar r2 = (q - points_.col(k)).squaredNorm();
                    if (r2 < h2_) fn(k, r2);
                }
            }
        }
    }

    std::vector<int> neighbors(const Vec3<Scalar>& p) const {
        std::vector<int> out;
        forEachNeighbor(p, [&](int k, Scalar) { out.push_back(k); });
        return out;
    }

    /// Neighbors of stored point i, ascending, including i itself.
    std::vector<int> neighborsOf(int i) const {
        if (i < 0 || i >= pointCount()) {
            throw std::out_of_range("neighbor query index out of range");
        }
        return neighbors(Vec3<Scalar>(points_.col(i)));
    }

    /// Neighbor lists for every stored point. Capacity comes from cell
    /// occupancy sums (an upper bound needing no distance tests), one exact
    /// scan fills at padded offsets with disjoint writes, and a serial pass
    /// compacts. Ordering is canonical, so results do not depend on thread
    /// count.
    NeighborLists buildNeighborLists() const {
        const int n = pointCount();
        NeighborLists nl;
        nl.offsets.assign(static_cast<size_t>(n) + 1, 0);
        if (n == 0) return nl;
        std::vector<std::int64_t> padded(static_cast<size_t>(n) + 1, 0);
        for (int i = 0; i < n; ++i) {
            padded[static_cast<size_t>(i) + 1] =
                padded[static_cast<size_t>(i)] + candidateCount(points_.col(i));
        }
        if (padded[static_cast<size_t>(n)] > std::numeric_limits<int>::max()) {
            throw std::runtime_error("neighbor list overflow");
        }
        nl.indices.resize(static_cast<size_t>(padded[static_cast<size_t>(n)]));
        std::vector<int> counts(static_cast<size_t>(n));
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) {
            std::int64_t w = padded[static_cast<size_t>(i)];
            forEachNeighbor(points_.col(i), [&](int k, Scalar) {
                nl.indices[static_cast<size_t>(w++)] = k;
            });
            counts[static_cast<size_t>(i)] = static_cast<int>(w - padded[static_cast<size_t>(i)]);
        }
        // Compaction moves runs left only, so the forward copy never clobbers
        // unread input.
        for (int i = 0; i < n; ++i) {
            const int cnt = counts[static_cast<size_t>(i)];
            const auto src = nl.indices.begin() + padded[static_cast<size_t>(i)];
            const auto dst = nl.indices.begin() + nl.offsets[static_cast<size_t>(i)];
            if (dst != src) std::copy(src, src + cnt, dst);
            nl.offsets[static_cast<size_t>(i) + 1] = nl.offsets[static_cast<size_t>(i)] + cnt;
        }
        nl.indices.resize(static_cast<size_t>(nl.offsets[static_cast<size_t>(n)]));
        return nl;
    }

private:
    int linearCell(const Eigen::Vector3i& c) const {
        return static_cast<int>((std::int64_t(c[2]) * dims_[1] + c[1]) * dims_[0] + c[0]);
    }

    // Occupancy of the 27 surrounding cells: an upper bound on the neighbor
    // count that needs no distance tests.
    template <class Derived>
    int candidateCount(const Eigen::MatrixBase<Derived>& p) const {
        Eigen::Vector3i lo, hi;
        for (int a = 0; a < 3; ++a) {
            const int c = static_cast<int>(std::floor((p[a] - origin_[a]) / h_));
            lo[a] = std::max(c - 1, 0);
            hi[a] = std::min(c + 1, dims_[a] - 1);
            if (lo[a] > hi[a]) return 0;
        }
        int total = 0;
        for (int cz = lo[2]; cz <= hi[2]; ++cz) {
            for (int cy = lo[1]; cy <= hi[1]; ++cy) {
                const std::int64_t rowBase = (std::int64_t(cz) * dims_[1] + cy) * dims_[0];
                total += cellStart_[static_cast<size_t>(rowBase + hi[0]) + 1] -
                         cellStart_[static_cast<size_t>(rowBase + lo[0])];
            }
        }
        return total;
    }

    Scalar h_ = Scalar(0);
    Scalar h2_ = Scalar(0);
    Vec3<Scalar> origin_ = Vec3<Scalar>::Zero();
    Eigen::Vector3i dims_ = Eigen::Vector3i::Ones();
    std::vector<int> cellStart_;
    std::vector<int> perm_;
    Mat3X<Scalar> points_;
};

}  // namespace apbf
