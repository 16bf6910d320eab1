#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "apbf/particle_state.hpp"
#include "apbf/types.hpp"

namespace apbf {

template <class Scalar>
struct Camera {
    Vec3<Scalar> eye = Vec3<Scalar>(0, 0, 0);
    Vec3<Scalar> lookAt = Vec3<Scalar>(0, 0, -1);
    Vec3<Scalar> up = Vec3<Scalar>(0, 1, 0);
    Scalar verticalFov = Scalar(1.0471975511965976);  // 60 degrees
    int width = 256;
    int height = 256;
    Scalar nearClip = Scalar(1e-3);

    void validate() const {
        if (width <= 0 || height <= 0) {
            throw std::invalid_argument("camera resolution must be positive in both axes");
        }
        if (!((lookAt - eye).squaredNorm() > Scalar(0))) {
            throw std::invalid_argument("camera look-at must differ from eye");
        }
        if (!(verticalFov > Scalar(0)) || !(verticalFov < std::numbers::pi_v<Scalar>)) {
            throw std::invalid_argument("vertical fov must lie in (0, pi)");
        }
        if (!(nearClip > Scalar(0))) {
            throw std::invalid_argument("near clip must be positive");
        }
    }
};

/// Orthonormal basis and screen mapping derived from a Camera. Pixel (ix,iy)
/// has its center at continuous coordinates (ix+0.5, iy+0.5); row 0 is the
/// top of the image.
template <class Scalar>
struct CameraFrame {
    Vec3<Scalar> eye, forward, right, trueUp;
    Scalar tanX, tanY;
    int width, height;
    Scalar nearClip;

    explicit CameraFrame(const Camera<Scalar>& cam) {
        cam.validate();
        eye = cam.eye;
        forward = (cam.lookAt - cam.eye).normalized();
        right = forward.cross(cam.up);
        const Scalar len = right.norm();
        if (!(len > Scalar(1e-12))) {
            throw std::invalid_argument("camera up is parallel to the view direction");
        }
        right /= len;
        trueUp = right.cross(forward);
        tanY = std::tan(cam.verticalFov / Scalar(2));
        tanX = tanY * Scalar(cam.width) / Scalar(cam.height);
        width = cam.width;
        height = cam.height;
        nearClip = cam.nearClip;
    }

    struct Projection {
        Scalar u = 0, v = 0;       // continuous pixel coordinates
        Scalar zForward = 0;       // view depth along the forward axis
        Scalar distance = 0;       // Euclidean distance from the eye
        bool inFront = false;      // strictly past the near plane
        bool onScreen = false;
    };

    template <class Derived>
    Projection project(const Eigen::MatrixBase<Derived>& p) const {
        Projection pr;
        const Vec3<Scalar> rel = p - eye;
        pr.zForward = rel.dot(forward);
        pr.distance = rel.norm();
        if (!(pr.zForward > nearClip)) return pr;
        pr.inFront = true;
        const Scalar sx = rel.dot(right) / (pr.zForward * tanX);
        const Scalar sy = rel.dot(trueUp) / (pr.zForward * tanY);
        pr.u = (sx + Scalar(1)) / Scalar(2) * Scalar(width);
        pr.v = (Scalar(1) - sy) / Scalar(2) * Scalar(height);
        pr.onScreen = pr.u >= Scalar(0) && pr.u < Scalar(width) && pr.v >= Scalar(0) &&
                      pr.v < Scalar(height);
        return pr;
    }

    Vec3<Scalar> rayDir(int ix, int iy) const {
        const Scalar ndcX = (Scalar(ix) + Scalar(0.5)) / Scalar(width) * Scalar(2) - Scalar(1);
        const Scalar ndcY = Scalar(1) - (Scalar(iy) + Scalar(0.5)) / Scalar(height) * Scalar(2);
        return (forward + ndcX * tanX * right + ndcY * tanY * trueUp).normalized();
    }
};

template <class Scalar>
struct DepthBuffer {
    int width = 0;
    int height = 0;
    std::vector<Scalar> depth;  // Euclidean ray distance; +infinity where unwritten

    DepthBuffer() = default;
    DepthBuffer(int w, int h)
        : width(w),
          height(h),
          depth(static_cast<size_t>(w) * static_cast<size_t>(h),
                std::numeric_limits<Scalar>::infinity()) {
        if (w <= 0 || h <= 0) {
            throw std::invalid_argument("depth buffer resolution must be positive");
        }
    }

    Scalar& at(int x, int y) { return depth[static_cast<size_t>(y) * width + x]; }
    Scalar at(int x, int y) const { return depth[static_cast<size_t>(y) * width + x]; }
};

template <class Scalar>
Scalar sampleDepth(const DepthBuffer<Scalar>& buf, int x, int y) {
    if (x < 0 || x >= buf.width || y < 0 || y >= buf.height) {
        throw std::out_of_range("depth buffer pixel out of range");
    }
    return buf.at(x, y);
}

namespace detail {

// Rasterize one sphere: exact near ray-sphere hit per covered pixel, reported
// through onHit(ix, iy, t). The pixel bound is padded; the ray test is exact.
template <class Scalar, class F>
void splatSphere(const CameraFrame<Scalar>& frame, const Vec3<Scalar>& center, Scalar r,
                 F&& onHit) {
    const Vec3<Scalar> rel = center - frame.eye;
    const Scalar z = rel.dot(frame.forward);
    if (!(z > frame.nearClip)) return;
    const Scalar q = rel.squaredNorm();
    const Scalar r2 = r * r;

    int x0 = 0, x1 = frame.width - 1, y0 = 0, y1 = frame.height - 1;
    if (q > r2) {
        // Conservative silhouette bound: worst-direction image-plane extent of
        // the view cone of half-angle alpha around the center direction,
        // tan(gamma+alpha) - tan(gamma), measured from the projected center.
        const Scalar cx = rel.dot(frame.right) / z;
        const Scalar cy = rel.dot(frame.trueUp) / z;
        const Scalar tana = r / std::sqrt(q - r2);
        const Scalar rho = std::sqrt(cx * cx + cy * cy);
        if (tana * rho < Scalar(1)) {
            const Scalar u = (cx / frame.tanX + Scalar(1)) / Scalar(2) * Scalar(frame.width);
            const Scalar v = (Scalar(1) - cy / frame.tanY) / Scalar(2) * Scalar(frame.height);
            const Scalar ext =
                tana * (Scalar(1) + rho * rho) / (Scalar(1) - tana * rho);
            const Scalar eu = ext / frame.tanX * Scalar(frame.width) / Scalar(2);
            const Scalar ev = ext / frame.tanY * Scalar(frame.height) / Scalar(2);
            const Scalar w = Scalar(frame.width), h = Scalar(frame.height);
            // Clamp before the int cast; off-screen centers can sit arbitrarily
            // far outside the viewport.
            x0 = std::max(0, static_cast<int>(std::floor(std::clamp(u - eu, Scalar(0), w))) - 1);
            x1 = std::min(frame.width - 1,
                          static_cast<int>(std::ceil(std::clamp(u + eu, Scalar(-1), w))) + 1);
            y0 = std::max(0, static_cast<int>(std::floor(std::clamp(v - ev, Scalar(0), h))) - 1);
            y1 = std::min(frame.height - 1,
                          static_cast<int>(std::ceil(std::clamp(v + ev, Scalar(-1), h))) + 1);
        }
    }
    // Unnormalized rays: normalization folds into the hit distance, so the
    // (far more frequent) misses never pay a sqrt.
    for (int iy = y0; iy <= y1; ++iy) {
        const Scalar ry =
            (Scalar(1) - (Scalar(iy) + Scalar(0.5)) / Scalar(frame.height) * Scalar(2)) *
            frame.tanY;
        const Vec3<Scalar> rowBase = frame.forward + ry * frame.trueUp;
        for (int ix = x0; ix <= x1; ++ix) {
            const Scalar rx =
                ((Scalar(ix) + Scalar(0.5)) / Scalar(frame.width) * Scalar(2) - Scalar(1)) *
                frame.tanX;
            const Vec3<Scalar> d = rowBase + rx * frame.right;
            const Scalar a = d.squaredNorm();
            const Scalar b = d.dot(rel);
            const Scalar disc = b * b - a * (q - r2);
            if (disc < Scalar(0)) continue;
            const Scalar t = (b - std::sqrt(disc)) / std::sqrt(a);
            if (t > frame.nearClip) onHit(ix, iy, t);
        }
    }
}

}  // namespace detail

/// Splat all particles as spheres of radius r, keeping the nearest ray hit
/// per pixel. Min compositing is order-independent, so the parallel merge is
/// bit-identical to a sequential pass.
template <class Scalar>
DepthBuffer<Scalar> splat(const Mat3X<Scalar>& positions, Scalar r, const Camera<Scalar>& cam) {
    if (!(r > Scalar(0))) {
        throw std::invalid_argument("splat radius must be positive");
    }
    const CameraFrame<Scalar> frame(cam);
    DepthBuffer<Scalar> buf(cam.width, cam.height);
    const int n = static_cast<int>(positions.cols());
#pragma omp parallel
    {
        DepthBuffer<Scalar> local(cam.width, cam.height);
#pragma omp for schedule(static) nowait
        for (int i = 0; i < n; ++i) {
            detail::splatSphere(frame, Vec3<Scalar>(positions.col(i)), r,
                                [&](int ix, int iy, Scalar t) {
                                    Scalar& cell = local.at(ix, iy);
                                    if (t < cell) cell = t;
                                });
        }
#pragma omp critical(apbf_splat_merge)
        {
            for (size_t k = 0; k < buf.depth.size(); ++k) {
                buf.depth[k] = std::min(buf.depth[k], local.depth[k]);
            }
        }
    }
    return buf;
}

struct ImageRgb {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // 3 bytes per pixel, row-major from the top

    ImageRgb() = default;
    ImageRgb(int w, int h)
        : width(w), height(h), rgb(static_cast<size_t>(w) * static_cast<size_t>(h) * 3, 0) {
        if (w <= 0 || h <= 0) {
            throw std::invalid_argument("image resolution must be positive");
        }
    }

    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        const size_t o = (static_cast<size_t>(y) * width + x) * 3;
        rgb[o] = r;
        rgb[o + 1] = g;
        rgb[o + 2] = b;
    }
};

inline void writePpm(const ImageRgb& image, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("cannot open image file for writing: " + path.string());
    }
    os << "P6\n" << image.width << " " << image.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(image.rgb.data()),
             static_cast<std::streamsize>(image.rgb.size()));
    if (!os) {
        throw std::runtime_error("failed writing image file: " + path.string());
    }
}

/// Grayscale view of a depth buffer: nearest finite depth brightest,
/// unwritten pixels black.
template <class Scalar>
ImageRgb depthToImage(const DepthBuffer<Scalar>& buf) {
    ImageRgb img(buf.width, buf.height);
    Scalar lo = std::numeric_limits<Scalar>::infinity();
    Scalar hi = -std::numeric_limits<Scalar>::infinity();
    for (Scalar d : buf.depth) {
        if (std::isfinite(d)) {
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
    }
    if (!std::isfinite(lo)) return img;
    const Scalar span = hi > lo ? hi - lo : Scalar(1);
    for (int y = 0; y < buf.height; ++y) {
        for (int x = 0; x < buf.width; ++x) {
            const Scalar d = buf.at(x, y);
            if (!std::isfinite(d)) continue;
            const Scalar t = (d - lo) / span;
            const auto g = static_cast<std::uint8_t>(
                std::lround(double(Scalar(255) - t * Scalar(191))));
            img.set(x, y, g, g, g);
        }
    }
    return img;
}

template <class Scalar>
void writePpm(const DepthBuffer<Scalar>& buf, const std::filesystem::path& path) {
    writePpm(depthToImage(buf), path);
}

/// Iteration-budget color ramp: full budget green, middle yellow, lowest red.
inline void levelColor(int level, const IterationRange& range, std::uint8_t& r,
                       std::uint8_t& g, std::uint8_t& b) {
    double u = 1.0;
    if (range.nMax > range.nMin) {
        u = double(level - range.nMin) / double(range.nMax - range.nMin);
        u = std::clamp(u, 0.0, 1.0);
    }
    if (u >= 0.5) {
        r = static_cast<std::uint8_t>(std::lround(510.0 * (1.0 - u)));
        g = 255;
    } else {
        r = 255;
        g = static_cast<std::uint8_t>(std::lround(510.0 * u));
    }
    b = 0;
}

/// Opaque splat render with per-pixel nearest particle colored by its level.
/// Sequential so equal-depth ties resolve to the lowest particle index.
template <class Scalar>
ImageRgb renderLevelImage(const Mat3X<Scalar>& positions, const VecXi& levels, Scalar r,
                          const Camera<Scalar>& cam, const IterationRange& range) {
    if (!(r > Scalar(0))) {
        throw std::invalid_argument("splat radius must be positive");
    }
    if (levels.size() != positions.cols()) {
        throw std::invalid_argument("level array size mismatch");
    }
    const CameraFrame<Scalar> frame(cam);
    DepthBuffer<Scalar> buf(cam.width, cam.height);
    std::vector<int> owner(buf.depth.size(), -1);
    for (int i = 0; i < static_cast<int>(positions.cols()); ++i) {
        detail::splatSphere(frame, Vec3<Scalar>(positions.col(i)), r,
                            [&](int ix, int iy, Scalar t) {
                                Scalar& cell = buf.at(ix, iy);
                                if (t < cell) {
                                    cell = t;
                                    owner[static_cast<size_t>(iy) * cam.width + ix] = i;
                                }
                            });
    }
    ImageRgb img(cam.width, cam.height);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const int who = owner[static_cast<size_t>(y) * cam.width + x];
            if (who < 0) continue;
            std::uint8_t cr, cg, cb;
            levelColor(levels[who], range, cr, cg, cb);
            img.set(x, y, cr, cg, cb);
        }
    }
    return img;
}

}  // namespace apbf
