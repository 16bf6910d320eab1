#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "apbf/types.hpp"

namespace apbf {

// Per-particle iteration budget range [nMin, nMax].
struct IterationRange {
    int nMin = 1;
    int nMax = 1;

    IterationRange() = default;
    IterationRange(int lo, int hi) : nMin(lo), nMax(hi) {
        if (nMin < 1 || nMax < nMin) {
            throw std::invalid_argument("iteration range requires 1 <= n_min <= n_max");
        }
    }

    bool contains(int level) const { return nMin <= level && level <= nMax; }
    bool operator==(const IterationRange&) const = default;
};

/// Structure-of-arrays fluid state. The neighbor grid reorders all arrays
/// jointly each build so per-cell particle data stays contiguous.
template <class Scalar>
struct ParticleSet {
    Mat3X<Scalar> x;      // current positions
    Mat3X<Scalar> xStar;  // predicted positions
    Mat3X<Scalar> v;      // velocities
    VecX<Scalar> mass;
    VecX<Scalar> invMass;
    VecX<Scalar> lambda;  // scaling-factor cache; inactive particles keep their last value
    VecXi level;          // iteration budget per particle

    ParticleSet() = default;

    ParticleSet(const Mat3X<Scalar>& positions, Scalar particleMass, int initialLevel) {
        if (!(particleMass > Scalar(0))) {
            throw std::invalid_argument("particle mass must be positive");
        }
        const Eigen::Index n = positions.cols();
        x = positions;
        xStar = positions;
        v = Mat3X<Scalar>::Zero(3, n);
        mass = VecX<Scalar>::Constant(n, particleMass);
        invMass = VecX<Scalar>::Constant(n, Scalar(1) / particleMass);
        lambda = VecX<Scalar>::Zero(n);
        level = VecXi::Constant(n, initialLevel);
    }

    int count() const { return static_cast<int>(x.cols()); }

    void setMasses(const VecX<Scalar>& masses) {
        if (masses.size() != x.cols()) {
            throw std::invalid_argument("mass array size mismatch");
        }
        if ((masses.array() <= Scalar(0)).any()) {
            throw std::invalid_argument("particle masses must be positive");
        }
        mass = masses;
        invMass = masses.cwiseInverse();
    }

    // Gather-reorder every array by the same permutation: entry k of the
    // result is entry perm[k] of the input.
    void applyPermutation(const std::vector<int>& perm) {
        const int n = count();
        if (static_cast<int>(perm.size()) != n) {
            throw std::invalid_argument("permutation size mismatch");
        }
        Mat3X<Scalar> tmp3(3, n);
        VecX<Scalar> tmp(n);
        VecXi tmpi(n);
        auto gather3 = [&](Mat3X<Scalar>& a) {
            for (int k = 0; k < n; ++k) tmp3.col(k) = a.col(perm[k]);
            a.swap(tmp3);
        };
        auto gather = [&](VecX<Scalar>& a) {
            for (int k = 0; k < n; ++k) tmp[k] = a[perm[k]];
            a.swap(tmp);
        };
        gather3(x);
        gather3(xStar);
        gather3(v);
        gather(mass);
        gather(invMass);
        gather(lambda);
        for (int k = 0; k < n; ++k) tmpi[k] = level[perm[k]];
        level.swap(tmpi);
    }

    // Throws NumericalError naming the pass and the first offending particle.
    void validateFinite(const char* pass) const {
        auto check3 = [&](const Mat3X<Scalar>& a, const char* field) {
            if (a.allFinite()) return;
            for (int i = 0; i < count(); ++i) {
                if (!a.col(i).allFinite()) {
                    throw NumericalError(pass, i, std::string("non-finite ") + field);
                }
            }
        };
        check3(x, "position");
        check3(xStar, "predicted position");
        check3(v, "velocity");
        if (!lambda.allFinite()) {
            for (int i = 0; i < count(); ++i) {
                if (!std::isfinite(lambda[i])) {
                    throw NumericalError(pass, i, "non-finite lambda");
                }
            }
        }
    }
};

/// Particle i takes part in solver iteration l iff its level is at least l.
inline bool isActive(int level, int iteration) { return level >= iteration; }

/// Indices of all particles still active in the given iteration, ascending.
inline std::vector<int> activeSet(const VecXi& levels, int iteration) {
    std::vector<int> out;
    out.reserve(static_cast<size_t>(levels.size()));
    for (int i = 0; i < levels.size(); ++i) {
        if (isActive(levels[i], iteration)) out.push_back(i);
    }
    return out;
}

/// Complement of the active set, ascending. Empty for iteration <= 1 so the
/// first iteration never treats anything as finished.
inline std::vector<int> finishedSet(const VecXi& levels, int iteration) {
    std::vector<int> out;
    if (iteration <= 1) return out;
    for (int i = 0; i < levels.size(); ++i) {
        if (!isActive(levels[i], iteration)) out.push_back(i);
    }
    return out;
}

/// Snapshot export, one `x,y,z,level` record per particle.
template <class Scalar>
void writeParticleSnapshot(std::ostream& os, const ParticleSet<Scalar>& state) {
    os << "x,y,z,level\n";
    char buf[128];
    for (int i = 0; i < state.count(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%d\n", double(state.x(0, i)),
                      double(state.x(1, i)), double(state.x(2, i)), state.level[i]);
        os << buf;
    }
}

template <class Scalar>
void writeParticleSnapshot(const std::filesystem::path& path, const ParticleSet<Scalar>& state) {
    std::ofstream os(path);
    if (!os) {
        throw std::runtime_error("cannot open particle snapshot file for writing: " +
                                 path.string());
    }
    writeParticleSnapshot(os, state);
}

}  // namespace apbf
