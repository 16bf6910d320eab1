#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "apbf/depth_splat.hpp"
#include "apbf/lod.hpp"
#include "apbf/particle_state.hpp"
#include "apbf/sdf.hpp"
#include "apbf/solver.hpp"
#include "apbf/types.hpp"

namespace apbf {

struct FluidBlock {
    Vec3<double> origin = Vec3<double>::Zero();
    Eigen::Vector3i counts = Eigen::Vector3i::Ones();
    double spacing = 0.025;
};

struct ScenarioSpec {
    std::string name;
    double scale = 1.0;
    std::vector<FluidBlock> blocks;
    SdfScene<double> scene;
    Camera<double> camera;
    SolverConfig<double> solver;
    LodModelConfig<double> lod;
    int frames = 300;
    double jitter = 0.005;  // lattice jitter amplitude as a fraction of spacing

    int particleCount() const;
};

// Deterministic generator for lattice jitter; identical sequences on every
// platform, unlike distribution adapters.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    // Uniform in [-1, 1).
    double symmetric() { return uniform() * 2.0 - 1.0; }
};

/// Axis-aligned lattice, x fastest then y then z; jitterAmplitude is an
/// absolute world-unit bound per component.
Mat3X<double> spawnBlock(const Vec3<double>& origin, const Eigen::Vector3i& counts,
                         double spacing, double jitterAmplitude = 0.0,
                         SplitMix64* rng = nullptr);

/// All blocks of the spec concatenated in order, one jitter stream across
/// them.
Mat3X<double> spawnScenario(const ScenarioSpec& spec, std::uint64_t seed);

/// Ready-to-step particle state: lattice mass rho0 * spacing^3, levels at the
/// top of the configured range.
ParticleSet<double> makeState(const ScenarioSpec& spec, std::uint64_t seed);

/// Built-in scenario by name at the given scale, or a scenario config file
/// path. Unknown names raise an error listing the valid ones.
ScenarioSpec buildScenario(const std::string& nameOrPath, double scale);

/// Parse a scenario config file (documented in docs/scenario_format.md).
ScenarioSpec loadScenarioFile(const std::filesystem::path& path, double scale);

std::uint64_t fnv1a64(const std::string& bytes);

/// Hash over the physical setup only: fluid layout, scene, camera, timestep
/// and fluid constants, seed. Mode, iteration range, LOD model and
/// stabilization settings are excluded so runs of different solver modes on
/// the same scenario remain comparable.
std::uint64_t scenarioHash(const ScenarioSpec& spec, std::uint64_t seed);

}  // namespace apbf
