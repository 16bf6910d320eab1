#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "apbf/depth_splat.hpp"
#include "apbf/particle_state.hpp"
#include "apbf/types.hpp"

namespace apbf {

enum class LodModel { Dtc, Dtvs };

template <class Scalar>
struct LodModelConfig {
    LodModel model = LodModel::Dtvs;
    Scalar dMin = Scalar(0);
    Scalar dMax = Scalar(1);
    IterationRange range;
    bool autoRange = true;  // derive dMin/dMax from the frame's distances

    void validate() const {
        if (!autoRange && !(dMin < dMax)) {
            throw std::invalid_argument("lod distance range requires d_min < d_max");
        }
    }
};

/// Linear interpolation from distance to iteration budget: nearest distances
/// get the full budget, rounding halves away from zero.
template <class Scalar>
int mapDistanceToLevel(Scalar d, Scalar dMin, Scalar dMax, const IterationRange& range) {
    if (!(dMax > dMin)) return range.nMax;
    Scalar t = (d - dMin) / (dMax - dMin);
    t = std::clamp(t, Scalar(0), Scalar(1));
    const int level = static_cast<int>(std::round(Scalar(range.nMax) + t * Scalar(range.nMin - range.nMax)));
    return std::clamp(level, range.nMin, range.nMax);
}

template <class Scalar>
int mapDistanceToLevel(Scalar d, const LodModelConfig<Scalar>& cfg) {
    return mapDistanceToLevel(d, cfg.dMin, cfg.dMax, cfg.range);
}

namespace detail {

// Interpolated percentile of an ascending-sorted sample, p in [0, 100].
template <class Scalar>
Scalar sortedPercentile(const std::vector<Scalar>& values, Scalar p) {
    if (values.empty()) {
        throw std::invalid_argument("percentile of empty sample");
    }
    const Scalar pos = p / Scalar(100) * Scalar(values.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, values.size() - 1);
    const Scalar frac = pos - Scalar(lo);
    return values[lo] * (Scalar(1) - frac) + values[hi] * frac;
}

// Interpolated percentile of an unsorted sample, p in [0, 100].
template <class Scalar>
Scalar percentile(std::vector<Scalar> values, Scalar p) {
    std::sort(values.begin(), values.end());
    return sortedPercentile(values, p);
}

// 5th/95th percentile span; a collapsed span means every sampled particle is
// equally important and the caller assigns the full budget.
template <class Scalar>
bool resolveAutoRange(const std::vector<Scalar>& sample, Scalar& dMin, Scalar& dMax) {
    std::vector<Scalar> sorted = sample;
    std::sort(sorted.begin(), sorted.end());
    dMin = sortedPercentile(sorted, Scalar(5));
    dMax = sortedPercentile(sorted, Scalar(95));
    return dMax > dMin;
}

}  // namespace detail

/// Levels from Euclidean distance to the camera eye.
template <class Scalar>
VecXi lodDtc(const Mat3X<Scalar>& positions, const Camera<Scalar>& cam,
             const LodModelConfig<Scalar>& cfg) {
    cfg.validate();
    const int n = static_cast<int>(positions.cols());
    VecXi levels(n);
    if (n == 0) return levels;
    std::vector<Scalar> dist(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        dist[static_cast<size_t>(i)] = (positions.col(i) - cam.eye).norm();
    }
    Scalar dMin = cfg.dMin, dMax = cfg.dMax;
    if (cfg.autoRange && !detail::resolveAutoRange(dist, dMin, dMax)) {
        levels.setConstant(cfg.range.nMax);
        return levels;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        levels[i] = mapDistanceToLevel(dist[static_cast<size_t>(i)], dMin, dMax, cfg.range);
    }
    return levels;
}

/// Levels from the depth gap between a particle and the splatted surface at
/// its own pixel. Off-screen or behind-camera particles are invisible and get
/// the minimum budget; a gap under one particle radius counts as visible.
template <class Scalar>
VecXi lodDtvs(const Mat3X<Scalar>& positions, const Camera<Scalar>& cam,
              const LodModelConfig<Scalar>& cfg, Scalar r) {
    cfg.validate();
    const int n = static_cast<int>(positions.cols());
    VecXi levels(n);
    if (n == 0) return levels;
    const DepthBuffer<Scalar> buf = splat(positions, r, cam);
    const CameraFrame<Scalar> frame(cam);
    std::vector<Scalar> gap(static_cast<size_t>(n), Scalar(0));
    std::vector<char> visible(static_cast<size_t>(n), 0);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const auto pr = frame.project(positions.col(i));
        if (!pr.inFront || !pr.onScreen) continue;
        const int px = std::min(static_cast<int>(pr.u), cam.width - 1);
        const int py = std::min(static_cast<int>(pr.v), cam.height - 1);
        Scalar d = pr.distance - buf.at(px, py);
        if (d < r) d = Scalar(0);
        gap[static_cast<size_t>(i)] = std::max(d, Scalar(0));
        visible[static_cast<size_t>(i)] = 1;
    }
    Scalar dMin = cfg.dMin, dMax = cfg.dMax;
    bool spread = true;
    if (cfg.autoRange) {
        std::vector<Scalar> sample;
        sample.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            if (visible[static_cast<size_t>(i)]) sample.push_back(gap[static_cast<size_t>(i)]);
        }
        if (sample.empty()) {
            levels.setConstant(cfg.range.nMin);
            return levels;
        }
        spread = detail::resolveAutoRange(sample, dMin, dMax);
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        if (!visible[static_cast<size_t>(i)]) {
            levels[i] = cfg.range.nMin;
        } else if (!spread) {
            levels[i] = cfg.range.nMax;
        } else {
            levels[i] = mapDistanceToLevel(gap[static_cast<size_t>(i)], dMin, dMax, cfg.range);
        }
    }
    return levels;
}

/// Multi-camera blend: a particle important to any camera keeps its high
/// budget.
inline VecXi blendLod(const std::vector<VecXi>& perCamera) {
    if (perCamera.empty()) {
        throw std::invalid_argument("blend requires at least one level array");
    }
    VecXi out = perCamera.front();
    for (size_t k = 1; k < perCamera.size(); ++k) {
        if (perCamera[k].size() != out.size()) {
            throw std::invalid_argument("level array length mismatch");
        }
        out = out.cwiseMax(perCamera[k]);
    }
    return out;
}

}  // namespace apbf
