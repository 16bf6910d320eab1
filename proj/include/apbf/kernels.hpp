#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "apbf/types.hpp"

namespace apbf {

namespace detail {
template <class Scalar>
inline void checkSmoothingLength(Scalar h) {
    if (!(h > Scalar(0))) {
        throw std::invalid_argument("smoothing length must be positive");
    }
}
}  // namespace detail

/// Poly6 density kernel W(r,h) = 315/(64 pi h^9) (h^2 - |r|^2)^3, zero for |r| >= h.
template <class Derived>
typename Derived::Scalar densityKernel(const Eigen::MatrixBase<Derived>& r,
                                       typename Derived::Scalar h) {
    using S = typename Derived::Scalar;
    detail::checkSmoothingLength(h);
    const S r2 = r.squaredNorm();
    const S h2 = h * h;
    if (r2 >= h2) {
        return S(0);
    }
    const S d = h2 - r2;
    const S h4 = h2 * h2;
    const S norm = S(315.0 / 64.0) / (std::numbers::pi_v<S> * h4 * h4 * h);
    return norm * d * d * d;
}

// Squared-distance fast path used by the solver's neighbor sweeps.
template <class Scalar>
Scalar densityKernelR2(Scalar r2, Scalar h) {
    const Scalar h2 = h * h;
    if (r2 >= h2) {
        return Scalar(0);
    }
    const Scalar d = h2 - r2;
    const Scalar h4 = h2 * h2;
    const Scalar norm = Scalar(315.0 / 64.0) / (std::numbers::pi_v<Scalar> * h4 * h4 * h);
    return norm * d * d * d;
}

/// Spiky gradient kernel grad W(r,h) = -45/(pi h^6) (h - |r|)^2 r/|r|.
/// Returns zero at the origin and outside the support.
template <class Derived>
Vec3<typename Derived::Scalar> gradientKernel(const Eigen::MatrixBase<Derived>& r,
                                              typename Derived::Scalar h) {
    using S = typename Derived::Scalar;
    detail::checkSmoothingLength(h);
    const S rn = r.norm();
    if (rn >= h || rn == S(0)) {
        return Vec3<S>::Zero();
    }
    const S a = h - rn;
    const S h3 = h * h * h;
    const S coeff = S(-45) / (std::numbers::pi_v<S> * h3 * h3) * a * a / rn;
    return coeff * r.derived();
}

/// Analytic gradient of the poly6 density kernel itself,
/// grad W(r,h) = -945/(32 pi h^9) (h^2 - |r|^2)^2 r. Used for derivative
/// validation; the solver's position corrections use gradientKernel.
template <class Derived>
Vec3<typename Derived::Scalar> densityKernelGradient(const Eigen::MatrixBase<Derived>& r,
                                                     typename Derived::Scalar h) {
    using S = typename Derived::Scalar;
    detail::checkSmoothingLength(h);
    const S r2 = r.squaredNorm();
    const S h2 = h * h;
    if (r2 >= h2) {
        return Vec3<S>::Zero();
    }
    const S d = h2 - r2;
    const S h4 = h2 * h2;
    const S coeff = S(-945.0 / 32.0) / (std::numbers::pi_v<S> * h4 * h4 * h) * d * d;
    return coeff * r.derived();
}

}  // namespace apbf
