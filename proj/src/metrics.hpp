#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "apbf/particle_state.hpp"
#include "apbf/solver.hpp"

namespace apbf {

/// 100 * mean density / rest density over current positions.
double avgDensityPct(const ParticleSet<double>& state, const SolverConfig<double>& cfg);

double medianOf(std::vector<double> values);

struct RunReport {
    std::vector<FrameStats> frames;
    std::vector<std::pair<std::string, std::string>> echo;  // config header lines, in order
    std::uint64_t hash = 0;
    bool zeroTime = false;  // deterministic runs write time_ms as 0 for reproducibility

    double medianFrameMs() const;
    long long totalIterations() const;
    long long totalContacts() const;
};

struct MetricsRow {
    int frame = 0;
    double timeMs = 0;
    double avgDensityPct = 0;
    double minDensityPct = 0;
    double maxDensityPct = 0;
    long long totalIterations = 0;
    long long contacts = 0;
};

struct MetricsFile {
    std::optional<std::uint64_t> hash;
    std::vector<MetricsRow> rows;
};

extern const char* const kMetricsHeader;

void writeMetricsCsv(const std::filesystem::path& path, const RunReport& report);
MetricsFile readMetricsCsv(const std::filesystem::path& path);

struct CompareResult {
    double maxDelta = 0;
    int frames = 0;
    bool pass = false;
};

/// Per-frame |avg density| difference between two runs of the same scenario.
/// Refuses (throws) on mismatched scenario hashes or frame counts.
CompareResult compareRuns(const MetricsFile& ref, const MetricsFile& test, double tolerancePct);

}  // namespace apbf
