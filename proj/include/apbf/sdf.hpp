#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <variant>
#include <vector>

#include "apbf/particle_state.hpp"
#include "apbf/types.hpp"

namespace apbf {

// Signed distance convention: negative inside solid, positive outside.
// Interior flags flip a primitive into a container (fluid lives inside).

template <class Scalar>
struct HalfSpace {
    Vec3<Scalar> normal;  // unit, points out of the solid
    Scalar offset;        // phi(p) = normal . p - offset

    HalfSpace(const Vec3<Scalar>& n, Scalar off) : normal(n), offset(off) {
        const Scalar len = normal.norm();
        if (!(len > Scalar(0))) {
            throw std::invalid_argument("half-space normal must be nonzero");
        }
        normal /= len;
    }
};

template <class Scalar>
struct Sphere {
    Vec3<Scalar> center;
    Scalar radius;
    bool interior;  // true: hollow container, fluid inside

    Sphere(const Vec3<Scalar>& c, Scalar r, bool inside = false)
        : center(c), radius(r), interior(inside) {
        if (!(radius > Scalar(0))) {
            throw std::invalid_argument("sphere radius must be positive");
        }
    }
};

template <class Scalar>
struct Box {
    Vec3<Scalar> center;
    Vec3<Scalar> halfExtents;
    bool interior;  // true: open cavity, fluid inside

    Box(const Vec3<Scalar>& c, const Vec3<Scalar>& he, bool inside = false)
        : center(c), halfExtents(he), interior(inside) {
        if (!(halfExtents.minCoeff() > Scalar(0))) {
            throw std::invalid_argument("box half extents must be positive");
        }
    }
};

// Solid cone, axis +y: base disc of baseRadius at baseCenter, apex at
// baseCenter + (0, height, 0).
template <class Scalar>
struct Cone {
    Vec3<Scalar> baseCenter;
    Scalar baseRadius;
    Scalar height;

    Cone(const Vec3<Scalar>& base, Scalar r, Scalar h)
        : baseCenter(base), baseRadius(r), height(h) {
        if (!(baseRadius > Scalar(0)) || !(height > Scalar(0))) {
            throw std::invalid_argument("cone radius and height must be positive");
        }
    }
};

template <class Scalar>
using SdfPrimitive = std::variant<HalfSpace<Scalar>, Sphere<Scalar>, Box<Scalar>, Cone<Scalar>>;

template <class Scalar>
struct SdfScene {
    std::vector<SdfPrimitive<Scalar>> primitives;
    Scalar gradientStep = Scalar(1e-4);  // central-difference step for the cone

    bool empty() const { return primitives.empty(); }
};

template <class Scalar>
struct Contact {
    int particle;
    Scalar depth;          // penetration = r - phi(x*), > 0
    Vec3<Scalar> normal;   // unit outward gradient at x*
};

template <class Scalar>
struct SdfSample {
    Scalar phi;
    Vec3<Scalar> gradient;  // unit length
};

namespace detail {

template <class Scalar, class Derived>
Scalar primitiveDistance(const HalfSpace<Scalar>& hs, const Eigen::MatrixBase<Derived>& p) {
    return hs.normal.dot(p) - hs.offset;
}

template <class Scalar, class Derived>
Scalar primitiveDistance(const Sphere<Scalar>& s, const Eigen::MatrixBase<Derived>& p) {
    const Scalar d = (p - s.center).norm() - s.radius;
    return s.interior ? -d : d;
}

template <class Scalar, class Derived>
Scalar primitiveDistance(const Box<Scalar>& b, const Eigen::MatrixBase<Derived>& p) {
    const Vec3<Scalar> q = (p - b.center).cwiseAbs() - b.halfExtents;
    const Scalar outside = q.cwiseMax(Scalar(0)).norm();
    const Scalar inside = std::min(q.maxCoeff(), Scalar(0));
    const Scalar d = outside + inside;
    return b.interior ? -d : d;
}

// Exact distance to the revolved (radius, y) cross-section: boundary is the
// base segment (0,0)-(R,0) and the slant segment (R,0)-(0,H).
template <class Scalar, class Derived>
Scalar primitiveDistance(const Cone<Scalar>& c, const Eigen::MatrixBase<Derived>& p) {
    const Scalar rho = std::hypot(p[0] - c.baseCenter[0], p[2] - c.baseCenter[2]);
    const Scalar y = p[1] - c.baseCenter[1];
    const Scalar R = c.baseRadius;
    const Scalar H = c.height;

    const Scalar baseDx = rho - std::clamp(rho, Scalar(0), R);
    const Scalar dBase = std::hypot(baseDx, y);

    const Scalar ex = -R, ey = H;  // slant vector (R,0) -> (0,H)
    const Scalar t =
        std::clamp(((rho - R) * ex + y * ey) / (ex * ex + ey * ey), Scalar(0), Scalar(1));
    const Scalar dSlant = std::hypot(rho - (R + t * ex), y - t * ey);

    const bool inside = y >= Scalar(0) && y <= H && rho <= R * (Scalar(1) - y / H);
    const Scalar d = std::min(dBase, dSlant);
    return inside ? -d : d;
}

template <class Scalar, class Derived>
Vec3<Scalar> primitiveGradient(const HalfSpace<Scalar>& hs, const Eigen::MatrixBase<Derived>&,
                               Scalar) {
    return hs.normal;
}

template <class Scalar, class Derived>
Vec3<Scalar> primitiveGradient(const Sphere<Scalar>& s, const Eigen::MatrixBase<Derived>& p,
                               Scalar) {
    Vec3<Scalar> d = p - s.center;
    const Scalar len = d.norm();
    if (len <= Scalar(0)) return Vec3<Scalar>(0, 1, 0);
    d /= len;
    return s.interior ? Vec3<Scalar>(-d) : d;
}

template <class Scalar, class Derived>
Vec3<Scalar> primitiveGradient(const Box<Scalar>& b, const Eigen::MatrixBase<Derived>& p,
                               Scalar) {
    const Vec3<Scalar> rel = p - b.center;
    Vec3<Scalar> sgn;
    for (int a = 0; a < 3; ++a) sgn[a] = rel[a] < Scalar(0) ? Scalar(-1) : Scalar(1);
    const Vec3<Scalar> q = rel.cwiseAbs() - b.halfExtents;
    Vec3<Scalar> g;
    if (q.maxCoeff() > Scalar(0)) {
        g = sgn.cwiseProduct(q.cwiseMax(Scalar(0)));
        g.normalize();
    } else {
        int axis = 0;
        q.maxCoeff(&axis);
        g.setZero();
        g[axis] = sgn[axis];
    }
    return b.interior ? Vec3<Scalar>(-g) : g;
}

template <class Scalar, class Derived>
Vec3<Scalar> primitiveGradient(const Cone<Scalar>& c, const Eigen::MatrixBase<Derived>& p,
                               Scalar step) {
    Vec3<Scalar> g;
    Vec3<Scalar> q = p;
    for (int a = 0; a < 3; ++a) {
        q[a] = p[a] + step;
        const Scalar hi = primitiveDistance(c, q);
        q[a] = p[a] - step;
        const Scalar lo = primitiveDistance(c, q);
        q[a] = p[a];
        g[a] = (hi - lo) / (Scalar(2) * step);
    }
    const Scalar len = g.norm();
    if (len <= Scalar(0)) return Vec3<Scalar>(0, 1, 0);
    return g / len;
}

}  // namespace detail

/// Distance to the union of solids: min over primitives, with the unit
/// gradient of the minimizing primitive.
template <class Scalar, class Derived>
SdfSample<Scalar> sceneDistance(const SdfScene<Scalar>& scene,
                                const Eigen::MatrixBase<Derived>& p) {
    if (scene.empty()) {
        throw std::invalid_argument("scene distance query on empty scene");
    }
    Scalar best = std::numeric_limits<Scalar>::infinity();
    size_t bestIdx = 0;
    for (size_t k = 0; k < scene.primitives.size(); ++k) {
        const Scalar d = std::visit(
            [&](const auto& prim) { return detail::primitiveDistance(prim, p); },
            scene.primitives[k]);
        if (d < best) {
            best = d;
            bestIdx = k;
        }
    }
    Vec3<Scalar> g = std::visit(
        [&](const auto& prim) { return detail::primitiveGradient(prim, p, scene.gradientStep); },
        scene.primitives[bestIdx]);
    return {best, g};
}

/// One contact per particle with phi(x*) < r.
template <class Scalar>
std::vector<Contact<Scalar>> findContacts(const SdfScene<Scalar>& scene,
                                          const Mat3X<Scalar>& positions, Scalar r) {
    std::vector<Contact<Scalar>> contacts;
    if (scene.empty()) return contacts;
    const int n = static_cast<int>(positions.cols());
    std::vector<char> hit(static_cast<size_t>(n), 0);
    Mat3X<Scalar> normals(3, n);
    VecX<Scalar> depths(n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const SdfSample<Scalar> s = sceneDistance(scene, positions.col(i));
        if (s.phi < r) {
            hit[static_cast<size_t>(i)] = 1;
            depths[i] = r - s.phi;
            normals.col(i) = s.gradient;
        }
    }
    for (int i = 0; i < n; ++i) {
        if (hit[static_cast<size_t>(i)]) {
            contacts.push_back({i, depths[i], normals.col(i)});
        }
    }
    return contacts;
}

template <class Scalar>
Vec3<Scalar> resolveContact(const Vec3<Scalar>& p, const Contact<Scalar>& contact) {
    return p + contact.depth * contact.normal;
}

/// Contact projection for the finished subset: identical deltas go to both
/// current and predicted positions, so the implied velocity (x*-x)/dt of a
/// corrected particle is unchanged by this pass. Contacts are re-evaluated at
/// the current predicted positions every iteration.
template <class Scalar>
void prestabilize(ParticleSet<Scalar>& state, const SdfScene<Scalar>& scene,
                  const std::vector<int>& subset, int iterations, Scalar r) {
    if (scene.empty() || subset.empty() || iterations <= 0) return;
    const int m = static_cast<int>(subset.size());
    for (int it = 0; it < iterations; ++it) {
#pragma omp parallel for schedule(static)
        for (int k = 0; k < m; ++k) {
            const int i = subset[static_cast<size_t>(k)];
            const SdfSample<Scalar> s = sceneDistance(scene, state.xStar.col(i));
            if (s.phi < r) {
                const Vec3<Scalar> delta = (r - s.phi) * s.gradient;
                state.xStar.col(i) += delta;
                state.x.col(i) += delta;
            }
        }
    }
}

/// Largest residual penetration depth max(0, r - phi) over the given indices.
template <class Scalar>
Scalar maxPenetration(const SdfScene<Scalar>& scene, const Mat3X<Scalar>& positions,
                      const std::vector<int>& subset, Scalar r) {
    Scalar worst = Scalar(0);
    if (scene.empty()) return worst;
    for (int i : subset) {
        const SdfSample<Scalar> s = sceneDistance(scene, positions.col(i));
        worst = std::max(worst, r - s.phi);
    }
    return worst;
}

}  // namespace apbf
