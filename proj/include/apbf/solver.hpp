#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "apbf/depth_splat.hpp"
#include "apbf/kernels.hpp"
#include "apbf/lod.hpp"
#include "apbf/particle_state.hpp"
#include "apbf/sdf.hpp"
#include "apbf/types.hpp"
#include "apbf/uniform_grid.hpp"

namespace apbf {

enum class SolverMode { Pbf, Apbf };

template <class Scalar>
struct SolverConfig {
    Scalar dtFrame = Scalar(0.0016);
    int substeps = 2;
    IterationRange range{3, 6};
    Scalar restDensity = Scalar(1000);
    Scalar h = Scalar(0.05);
    Scalar epsilon = Scalar(1e-5);
    Vec3<Scalar> gravity = Vec3<Scalar>(0, Scalar(-9.81), 0);
    int stabIterations = 2;
    int stabThreshold = 0;          // 0: use range.nMax
    Scalar particleRadius = Scalar(0);  // 0: use h/4
    SolverMode mode = SolverMode::Apbf;
    Scalar velocityCap = Scalar(0);     // 0: one smoothing length per substep
    bool inactiveLambdaZero = false;    // alternative treatment of finished neighbors
    bool deterministic = false;         // pin solver passes to one thread
    bool recordResiduals = false;       // mean |C| after every iteration

    Scalar dtSubstep() const { return dtFrame / Scalar(substeps); }
    int effectiveStabThreshold() const { return stabThreshold > 0 ? stabThreshold : range.nMax; }
    Scalar effectiveParticleRadius() const {
        return particleRadius > Scalar(0) ? particleRadius : h / Scalar(4);
    }
    Scalar effectiveVelocityCap() const {
        return velocityCap > Scalar(0) ? velocityCap : h / dtSubstep();
    }

    void validate() const {
        if (!(dtFrame > Scalar(0))) throw std::invalid_argument("dt_frame must be positive");
        if (substeps < 1) throw std::invalid_argument("substeps must be at least 1");
        if (!(restDensity > Scalar(0))) throw std::invalid_argument("rest density must be positive");
        if (!(h > Scalar(0))) throw std::invalid_argument("smoothing length must be positive");
        if (epsilon < Scalar(0)) throw std::invalid_argument("epsilon must be non-negative");
        if (stabIterations < 0) throw std::invalid_argument("stab iterations must be non-negative");
        if (stabThreshold != 0 && (stabThreshold < 1 || stabThreshold > range.nMax)) {
            throw std::invalid_argument("stab threshold must lie in [1, n_max]");
        }
        if (particleRadius < Scalar(0)) throw std::invalid_argument("particle radius must be non-negative");
        if (velocityCap < Scalar(0)) throw std::invalid_argument("velocity cap must be non-negative");
        if (!gravity.allFinite()) throw std::invalid_argument("gravity must be finite");
    }
};

struct FrameStats {
    int frame = 0;
    double wallMs = 0;          // level assignment plus substeps; metrics excluded
    double avgDensityPct = 0;   // percentage of rest density over final positions
    double minDensityPct = 0;
    double maxDensityPct = 0;
    long long totalIterations = 0;  // active particle count summed over all iterations
    long long contacts = 0;
    std::vector<double> residuals;  // mean |C| per iteration when recording is on
};

/// Density at particle i, Eq-form: sum of m_j W(x_i - x_j) over the stored
/// neighbor list, which includes i itself.
template <class Scalar>
Scalar computeDensity(int i, const NeighborLists& nl, const VecX<Scalar>& masses,
                      const Mat3X<Scalar>& positions, Scalar h) {
    const Vec3<Scalar> xi = positions.col(i);
    Scalar rho = Scalar(0);
    for (int e = nl.begin(i); e < nl.end(i); ++e) {
        const int j = nl.indices[static_cast<size_t>(e)];
        const Scalar r2 = (xi - positions.col(j)).squaredNorm();
        rho += masses[j] * densityKernelR2(r2, h);
    }
    return rho;
}

/// Scaling factor for the density constraint of particle i. Single fused
/// sweep: density, own-gradient sum and the neighbor-gradient denominator
/// accumulate together in neighbor-list order.
template <class Scalar>
Scalar computeLambda(int i, const NeighborLists& nl, const ParticleSet<Scalar>& state,
                     const SolverConfig<Scalar>& cfg) {
    const Scalar invRho0 = Scalar(1) / cfg.restDensity;
    const Vec3<Scalar> xi = state.xStar.col(i);
    Scalar rho = Scalar(0);
    Vec3<Scalar> gradI = Vec3<Scalar>::Zero();
    Scalar denomJ = Scalar(0);
    for (int e = nl.begin(i); e < nl.end(i); ++e) {
        const int j = nl.indices[static_cast<size_t>(e)];
        const Vec3<Scalar> rij = xi - state.xStar.col(j);
        rho += state.mass[j] * densityKernelR2(rij.squaredNorm(), cfg.h);
        if (j != i) {
            const Vec3<Scalar> g = gradientKernel(rij, cfg.h);
            gradI += g;
            denomJ += state.invMass[j] * g.squaredNorm();
        }
    }
    const Scalar c = rho * invRho0 - Scalar(1);
    const Scalar denom = state.invMass[i] * (invRho0 * gradI).squaredNorm() +
                         invRho0 * invRho0 * denomJ + cfg.epsilon;
    return -c / denom;
}

/// Position correction for particle i from its own and its neighbors' cached
/// scaling factors. `iteration` matters only for the alternative that zeroes
/// finished neighbors' contributions; the default reads the frozen cache.
template <class Scalar>
Vec3<Scalar> computeDeltaP(int i, const NeighborLists& nl, const ParticleSet<Scalar>& state,
                           const SolverConfig<Scalar>& cfg, int iteration = 0) {
    const Vec3<Scalar> xi = state.xStar.col(i);
    const Scalar lamI = state.lambda[i];
    Vec3<Scalar> sum = Vec3<Scalar>::Zero();
    for (int e = nl.begin(i); e < nl.end(i); ++e) {
        const int j = nl.indices[static_cast<size_t>(e)];
        if (j == i) continue;
        Scalar lamJ = state.lambda[j];
        if (cfg.inactiveLambdaZero && iteration > 0 && !isActive(state.level[j], iteration)) {
            lamJ = Scalar(0);
        }
        sum += (lamI + lamJ) * gradientKernel(Vec3<Scalar>(xi - state.xStar.col(j)), cfg.h);
    }
    return state.invMass[i] / cfg.restDensity * sum;
}

/// Densities of a free-standing position set in original index order. Builds
/// a throwaway grid; used for end-of-frame metrics and test oracles.
template <class Scalar>
VecX<Scalar> allDensities(const Mat3X<Scalar>& positions, const VecX<Scalar>& masses, Scalar h) {
    const int n = static_cast<int>(positions.cols());
    VecX<Scalar> rho(n);
    if (n == 0) return rho;
    UniformGrid<Scalar> grid;
    grid.build(positions, h, h);
    const NeighborLists nl = grid.buildNeighborLists();
    const Mat3X<Scalar>& pts = grid.sortedPoints();
    const std::vector<int>& perm = grid.permutation();
    VecX<Scalar> sortedMass(n);
    for (int k = 0; k < n; ++k) sortedMass[k] = masses[perm[static_cast<size_t>(k)]];
#pragma omp parallel for schedule(static)
    for (int k = 0; k < n; ++k) {
        rho[perm[static_cast<size_t>(k)]] = computeDensity(k, nl, sortedMass, pts, h);
    }
    return rho;
}

/// Mean absolute constraint violation over all particles at the current
/// predicted positions.
template <class Scalar>
double meanAbsConstraint(const ParticleSet<Scalar>& state, const NeighborLists& nl,
                         const SolverConfig<Scalar>& cfg) {
    const int n = state.count();
    if (n == 0) return 0.0;
    VecX<Scalar> c(n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        c[i] = std::abs(computeDensity(i, nl, state.mass, state.xStar, cfg.h) / cfg.restDensity -
                        Scalar(1));
    }
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += double(c[i]);
    return sum / n;
}

namespace detail {

template <class Scalar>
void checkFiniteCols(const Mat3X<Scalar>& a, const char* pass, const char* field) {
    if (a.allFinite()) return;
    for (int i = 0; i < a.cols(); ++i) {
        if (!a.col(i).allFinite()) {
            throw NumericalError(pass, i, std::string("non-finite ") + field);
        }
    }
}

template <class Scalar>
void checkFiniteVec(const VecX<Scalar>& a, const char* pass, const char* field) {
    if (a.allFinite()) return;
    for (int i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a[i])) {
            throw NumericalError(pass, i, std::string("non-finite ") + field);
        }
    }
}

}  // namespace detail

/// Frame loop. PBF mode is the uniform-budget special case of the same
/// machinery, which is what makes the two modes bit-comparable.
template <class Scalar>
class Solver {
public:
    Solver(SolverConfig<Scalar> cfg, SdfScene<Scalar> scene)
        : cfg_(std::move(cfg)), scene_(std::move(scene)) {
        cfg_.validate();
#ifdef _OPENMP
        threads_ = cfg_.deterministic ? 1 : omp_get_max_threads();
#endif
    }

    const SolverConfig<Scalar>& config() const { return cfg_; }
    const SdfScene<Scalar>& scene() const { return scene_; }

    // Called after every iteration's position application, with the substep
    // index and the 1-based iteration.
    std::function<void(int, int, const ParticleSet<Scalar>&)> iterationObserver;

    /// Assign levels for this frame (uniform full budget in PBF mode, LOD
    /// model otherwise), then run all substeps.
    FrameStats stepFrame(ParticleSet<Scalar>& state, const Camera<Scalar>& cam,
                         const LodModelConfig<Scalar>& lodCfg, int frameIndex) {
        const auto t0 = std::chrono::steady_clock::now();
        assignLevels(state, cam, lodCfg);
        return runSubsteps(state, frameIndex, t0);
    }

    /// Run the frame with the caller's level assignment.
    FrameStats stepFrameWithLevels(ParticleSet<Scalar>& state, int frameIndex) {
        for (int i = 0; i < state.count(); ++i) {
            if (!cfg_.range.contains(state.level[i])) {
                throw std::invalid_argument("particle level outside configured iteration range");
            }
        }
        const auto t0 = std::chrono::steady_clock::now();
        return runSubsteps(state, frameIndex, t0);
    }

private:
    void assignLevels(ParticleSet<Scalar>& state, const Camera<Scalar>& cam,
                      const LodModelConfig<Scalar>& lodCfg) {
        if (cfg_.mode == SolverMode::Pbf) {
            state.level.setConstant(cfg_.range.nMax);
            return;
        }
        LodModelConfig<Scalar> lc = lodCfg;
        lc.range = cfg_.range;  // solver loop bound and level range must agree
        state.level = lc.model == LodModel::Dtc
                          ? lodDtc(state.x, cam, lc)
                          : lodDtvs(state.x, cam, lc, cfg_.effectiveParticleRadius());
    }

    FrameStats runSubsteps(ParticleSet<Scalar>& state,
                           int frameIndex,
                           std::chrono::steady_clock::time_point t0) {
        FrameStats stats;
        stats.frame = frameIndex;
        for (int s = 0; s < cfg_.substeps; ++s) {
            substep(state, s, stats);
        }
        stats.wallMs =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        const int n = state.count();
        if (n > 0) {
            const VecX<Scalar> rho = allDensities(state.x, state.mass, cfg_.h);
            const double scale = 100.0 / double(cfg_.restDensity);
            stats.avgDensityPct = double(rho.mean()) * scale;
            stats.minDensityPct = double(rho.minCoeff()) * scale;
            stats.maxDensityPct = double(rho.maxCoeff()) * scale;
        }
        return stats;
    }

    void substep(ParticleSet<Scalar>& state, int substepIndex, FrameStats& stats) {
        const Scalar dt = cfg_.dtSubstep();
        const Scalar radius = cfg_.effectiveParticleRadius();
        const int n = state.count();

#pragma omp parallel for schedule(static) num_threads(threads_)
        for (int i = 0; i < n; ++i) {
            state.v.col(i) += dt * cfg_.gravity;
            state.xStar.col(i) = state.x.col(i) + dt * state.v.col(i);
        }
        detail::checkFiniteCols(state.xStar, "predict", "predicted position");

        grid_.buildAndSort(state, cfg_.h, cfg_.h);
        nl_ = grid_.buildNeighborLists();
        if (!scene_.empty()) {
            const auto contacts = findContacts(scene_, state.xStar, radius);
            stats.contacts += static_cast<long long>(contacts.size());
        }

        const std::vector<int> finished = finishedSet(state.level, cfg_.effectiveStabThreshold());
        prestabilize(state, scene_, finished, cfg_.stabIterations, radius);
        if (!finished.empty()) {
            detail::checkFiniteCols(state.xStar, "prestabilize", "predicted position");
        }

        buildIterationOrder(state.level);
        if (static_cast<int>(deltaP_.cols()) != n) deltaP_.resize(3, n);

        for (int iter = 1; iter <= cfg_.range.nMax; ++iter) {
            const int active = activeCount_[static_cast<size_t>(iter)];
            if (active == 0) break;
            stats.totalIterations += active;

#pragma omp parallel for schedule(static) num_threads(threads_)
            for (int k = 0; k < active; ++k) {
                const int i = order_[static_cast<size_t>(k)];
                state.lambda[i] = computeLambda(i, nl_, state, cfg_);
            }
            detail::checkFiniteVec(state.lambda, "lambda", "lambda");

#pragma omp parallel for schedule(static) num_threads(threads_)
            for (int k = 0; k < active; ++k) {
                const int i = order_[static_cast<size_t>(k)];
                deltaP_.col(i) = computeDeltaP(i, nl_, state, cfg_, iter);
            }

#pragma omp parallel for schedule(static) num_threads(threads_)
            for (int k = 0; k < active; ++k) {
                const int i = order_[static_cast<size_t>(k)];
                state.xStar.col(i) += deltaP_.col(i);
                if (!scene_.empty()) {
                    const SdfSample<Scalar> s = sceneDistance(scene_, state.xStar.col(i));
                    if (s.phi < radius) {
                        state.xStar.col(i) += (radius - s.phi) * s.gradient;
                    }
                }
            }
            detail::checkFiniteCols(state.xStar, "apply", "predicted position");

            if (cfg_.recordResiduals) {
                stats.residuals.push_back(meanAbsConstraint(state, nl_, cfg_));
            }
            if (iterationObserver) iterationObserver(substepIndex, iter, state);
        }

        const Scalar cap = cfg_.effectiveVelocityCap();
#pragma omp parallel for schedule(static) num_threads(threads_)
        for (int i = 0; i < n; ++i) {
            state.v.col(i) = (state.xStar.col(i) - state.x.col(i)) / dt;
            const Scalar speed = state.v.col(i).norm();
            if (speed > cap) state.v.col(i) *= cap / speed;
            state.x.col(i) = state.xStar.col(i);
        }
        detail::checkFiniteCols(state.v, "finalize", "velocity");
        detail::checkFiniteCols(state.x, "finalize", "position");
    }

    // Particles ordered by level descending (stable by index), so the first
    // activeCount_[l] entries are exactly the active set of iteration l.
    void buildIterationOrder(const VecXi& levels) {
        const int n = static_cast<int>(levels.size());
        const int top = cfg_.range.nMax;
        levelCount_.assign(static_cast<size_t>(top) + 2, 0);
        for (int i = 0; i < n; ++i) ++levelCount_[static_cast<size_t>(levels[i])];
        activeCount_.assign(static_cast<size_t>(top) + 2, 0);
        for (int l = top; l >= 1; --l) {
            activeCount_[static_cast<size_t>(l)] =
                activeCount_[static_cast<size_t>(l) + 1] + levelCount_[static_cast<size_t>(l)];
        }
        bucketStart_.assign(static_cast<size_t>(top) + 2, 0);
        for (int l = top - 1; l >= 1; --l) {
            bucketStart_[static_cast<size_t>(l)] =
                bucketStart_[static_cast<size_t>(l) + 1] + levelCount_[static_cast<size_t>(l) + 1];
        }
        order_.assign(static_cast<size_t>(n), 0);
        for (int i = 0; i < n; ++i) {
            order_[static_cast<size_t>(bucketStart_[static_cast<size_t>(levels[i])]++)] = i;
        }
    }

    SolverConfig<Scalar> cfg_;
    SdfScene<Scalar> scene_;
    UniformGrid<Scalar> grid_;
    NeighborLists nl_;
    Mat3X<Scalar> deltaP_;
    std::vector<int> order_;
    std::vector<int> levelCount_;
    std::vector<int> activeCount_;
    std::vector<int> bucketStart_;
    int threads_ = 1;
};

}  // namespace apbf
