#include "metrics.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace apbf {

const char* const kMetricsHeader =
    "frame,time_ms,avg_density_pct,min_density_pct,max_density_pct,total_iterations,contacts";

double avgDensityPct(const ParticleSet<double>& state, const SolverConfig<double>& cfg) {
    if (state.count() == 0) return 0.0;
    const VecX<double> rho = allDensities(state.x, state.mass, cfg.h);
    return 100.0 * rho.sum() / (double(state.count()) * cfg.restDensity);
}

double medianOf(std::vector<double> values) {
    if (values.empty()) {
        throw std::invalid_argument("median of empty sample");
    }
    std::sort(values.begin(), values.end());
    const size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

double RunReport::medianFrameMs() const {
    std::vector<double> ms;
    ms.reserve(frames.size());
    for (const auto& f : frames) ms.push_back(f.wallMs);
    return medianOf(std::move(ms));
}

long long RunReport::totalIterations() const {
    long long total = 0;
    for (const auto& f : frames) total += f.totalIterations;
    return total;
}

long long RunReport::totalContacts() const {
    long long total = 0;
    for (const auto& f : frames) total += f.contacts;
    return total;
}

void writeMetricsCsv(const std::filesystem::path& path, const RunReport& report) {
    std::ofstream os(path);
    if (!os) {
        throw std::runtime_error("cannot open metrics file for writing: " + path.string());
    }
    for (const auto& [key, value] : report.echo) {
        os << "# " << key << " = " << value << "\n";
    }
    char buf[256];
    std::snprintf(buf, sizeof(buf), "# scenario_hash = %016" PRIx64 "\n", report.hash);
    os << buf << kMetricsHeader << "\n";
    for (const auto& f : report.frames) {
        std::snprintf(buf, sizeof(buf), "%d,%.3f,%.6f,%.6f,%.6f,%lld,%lld\n", f.frame,
                      report.zeroTime ? 0.0 : f.wallMs, f.avgDensityPct, f.minDensityPct,
                      f.maxDensityPct, f.totalIterations, f.contacts);
        os << buf;
    }
    if (!os) {
        throw std::runtime_error("failed writing metrics file: " + path.string());
    }
}

MetricsFile readMetricsCsv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("cannot open metrics file: " + path.string());
    }
    MetricsFile out;
    std::string line;
    bool sawHeader = false;
    int lineNo = 0;
    while (std::getline(is, line)) {
        ++lineNo;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::uint64_t h = 0;
            if (std::sscanf(line.c_str(), "# scenario_hash = %" SCNx64, &h) == 1) {
                out.hash = h;
            }
            continue;
        }
        if (!sawHeader) {
            if (line != kMetricsHeader) {
                throw std::runtime_error(path.string() + ":" + std::to_string(lineNo) +
                                         ": unexpected metrics header");
            }
            sawHeader = true;
            continue;
        }
        MetricsRow row;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lld,%lld", &row.frame, &row.timeMs,
                        &row.avgDensityPct, &row.minDensityPct, &row.maxDensityPct,
                        &row.totalIterations, &row.contacts) != 7) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineNo) +
                                     ": malformed metrics row");
        }
        out.rows.push_back(row);
    }
    if (!sawHeader) {
        throw std::runtime_error(path.string() + ": no metrics header found");
    }
    return out;
}

CompareResult compareRuns(const MetricsFile& ref, const MetricsFile& test, double tolerancePct) {
    if (ref.hash && test.hash && *ref.hash != *test.hash) {
        throw std::runtime_error("scenario hash mismatch: runs are not comparable");
    }
    if (ref.rows.size() != test.rows.size()) {
        throw std::runtime_error("frame count mismatch: " + std::to_string(ref.rows.size()) +
                                 " vs " + std::to_string(test.rows.size()));
    }
    CompareResult result;
    result.frames = static_cast<int>(ref.rows.size());
    for (size_t k = 0; k < ref.rows.size(); ++k) {
        result.maxDelta = std::max(
            result.maxDelta, std::abs(test.rows[k].avgDensityPct - ref.rows[k].avgDensityPct));
    }
    result.pass = result.maxDelta < tolerancePct;
    return result;
}

}  // namespace apbf
