#include "bench.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace apbf {

BenchMode parseBenchMode(const std::string& token) {
    BenchMode m;
    m.token = token;
    const auto colon = token.find(':');
    const std::string head = token.substr(0, colon);
    const std::string tail = colon == std::string::npos ? "" : token.substr(colon + 1);
    if (head == "pbf") {
        m.mode = SolverMode::Pbf;
        if (tail.empty()) {
            throw std::invalid_argument("pbf bench mode needs an iteration count, e.g. pbf:6");
        }
        try {
            m.pbfIterations = std::stoi(tail);
        } catch (const std::exception&) {
            throw std::invalid_argument("invalid pbf iteration count '" + tail + "'");
        }
        if (m.pbfIterations < 1) {
            throw std::invalid_argument("pbf iteration count must be at least 1");
        }
        return m;
    }
    if (head == "apbf") {
        m.mode = SolverMode::Apbf;
        if (tail == "dtc") m.lodModel = LodModel::Dtc;
        else if (tail == "dtvs") m.lodModel = LodModel::Dtvs;
        else if (!tail.empty()) {
            throw std::invalid_argument("apbf bench mode takes dtc or dtvs, got '" + tail + "'");
        }
        return m;
    }
    throw std::invalid_argument("unknown bench mode '" + token + "'; expected pbf:N or apbf:dtc|dtvs");
}

std::vector<BenchMode> parseBenchModes(const std::string& commaSeparated) {
    std::vector<BenchMode> out;
    std::stringstream ss(commaSeparated);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (!token.empty()) out.push_back(parseBenchMode(token));
    }
    if (out.empty()) {
        throw std::invalid_argument("no bench modes given");
    }
    return out;
}

std::vector<BenchResult> runBench(const ScenarioSpec& spec, const std::vector<BenchMode>& modes,
                                  int reps, int frames, std::uint64_t seed) {
    if (reps < 1) {
        throw std::invalid_argument("bench repetitions must be at least 1");
    }
    std::vector<BenchResult> results(modes.size());
    std::vector<std::vector<double>> medians(modes.size());
    // Reps interleave across modes so slow clock drift hits every mode alike.
    for (int rep = 0; rep < reps; ++rep) {
        for (std::size_t k = 0; k < modes.size(); ++k) {
            const auto& m = modes[k];
            RunOptions opt;
            opt.mode = m.mode;
            opt.lodModel = m.lodModel;
            if (m.mode == SolverMode::Pbf) {
                opt.range = IterationRange(m.pbfIterations, m.pbfIterations);
            }
            opt.frames = frames;
            opt.seed = seed;

            const RunReport report = runScenario(spec, opt);
            medians[k].push_back(report.medianFrameMs());
            results[k].token = m.token;
            results[k].iterations = report.totalIterations();
            results[k].frames = static_cast<int>(report.frames.size());
        }
    }
    for (std::size_t k = 0; k < modes.size(); ++k) {
        results[k].medianFrameMs = medianOf(std::move(medians[k]));
        results[k].particles = spec.particleCount();
    }
    return results;
}

std::string formatBenchReport(const std::vector<BenchResult>& results) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-12s %14s %18s %10s %10s\n", "mode", "median_ms",
                  "total_iterations", "frames", "particles");
    out += buf;
    for (const auto& r : results) {
        std::snprintf(buf, sizeof(buf), "%-12s %14.3f %18lld %10d %10d\n", r.token.c_str(),
                      r.medianFrameMs, r.iterations, r.frames, r.particles);
        out += buf;
    }
    const BenchResult* baseline = nullptr;
    for (const auto& r : results) {
        if (r.token.rfind("pbf", 0) == 0) {
            baseline = &r;
            break;
        }
    }
    if (baseline != nullptr) {
        for (const auto& r : results) {
            if (&r == baseline || r.token.rfind("apbf", 0) != 0) continue;
            const double tP = baseline->medianFrameMs;
            const double tA = r.medianFrameMs;
            if (!(tA > 0.0) || !(tP > 0.0)) continue;
            std::snprintf(buf, sizeof(buf),
                          "%s vs %s: speedup (t_pbf-t_apbf)/t_apbf = %.1f%%, "
                          "reduction (t_pbf-t_apbf)/t_pbf = %.1f%%, iteration ratio = %.3f\n",
                          r.token.c_str(), baseline->token.c_str(), 100.0 * (tP - tA) / tA,
                          100.0 * (tP - tA) / tP,
                          double(r.iterations) / double(baseline->iterations));
            out += buf;
        }
    }
    return out;
}

}  // namespace apbf
