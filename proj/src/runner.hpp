#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "metrics.hpp"
#include "scenario.hpp"

namespace apbf {

struct RunOptions {
    SolverMode mode = SolverMode::Apbf;
    std::optional<LodModel> lodModel;     // overrides the scenario's model
    std::optional<IterationRange> range;  // overrides the scenario's range
    int frames = 0;                       // 0: scenario default
    std::uint64_t seed = 0;
    bool deterministic = false;
    std::filesystem::path outDir;  // empty: nothing written
    int dumpImagesEvery = 0;
    int dumpParticlesEvery = 0;
};

const char* modeName(SolverMode mode);
const char* lodModelName(LodModel model);

/// Spawn, simulate and (optionally) persist one run. Writes metrics.csv plus
/// any requested frame dumps into outDir.
RunReport runScenario(const ScenarioSpec& spec, const RunOptions& opt);

}  // namespace apbf
