#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace apbf {

template <class Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

// Column-per-particle storage for positions, velocities and similar fields.
template <class Scalar>
using Mat3X = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

template <class Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using VecXi = Eigen::VectorXi;

// Thrown when a simulation pass produces a non-finite value. Carries the
// pass name and the offending particle so a run can abort with a usable
// diagnostic (CLI maps this to exit code 3).
class NumericalError : public std::runtime_error {
public:
    NumericalError(std::string pass, int particle, const std::string& detail)
        : std::runtime_error("numerical abort in pass '" + pass + "' at particle " +
                             std::to_string(particle) + ": " + detail),
          pass_(std::move(pass)),
          particle_(particle) {}

    const std::string& pass() const { return pass_; }
    int particle() const { return particle_; }

private:
    std::string pass_;
    int particle_;
};

}  // namespace apbf
