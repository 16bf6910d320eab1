#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "runner.hpp"
#include "scenario.hpp"

namespace apbf {

// A benchmark entry: "pbf:N" runs the uniform solver with N iterations,
// "apbf:dtc" / "apbf:dtvs" run the adaptive solver with that LOD model and
// the scenario's iteration range.
struct BenchMode {
    std::string token;
    SolverMode mode = SolverMode::Apbf;
    int pbfIterations = 0;
    std::optional<LodModel> lodModel;
};

BenchMode parseBenchMode(const std::string& token);
std::vector<BenchMode> parseBenchModes(const std::string& commaSeparated);

struct BenchResult {
    std::string token;
    double medianFrameMs = 0;   // median across repetitions of per-run medians
    long long iterations = 0;   // exact per-particle iteration total, machine-independent
    int frames = 0;
    int particles = 0;
};

std::vector<BenchResult> runBench(const ScenarioSpec& spec, const std::vector<BenchMode>& modes,
                                  int reps, int frames, std::uint64_t seed);

/// Table plus, when a pbf baseline is present, both improvement conventions
/// for each adaptive row: (t_pbf - t_apbf)/t_apbf and (t_pbf - t_apbf)/t_pbf.
std::string formatBenchReport(const std::vector<BenchResult>& results);

}  // namespace apbf
