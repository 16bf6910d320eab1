#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "bench.hpp"
#include "metrics.hpp"
#include "runner.hpp"
#include "scenario.hpp"

namespace {

apbf::IterationRange parseRangeArg(const std::string& text) {
    const auto dots = text.find("..");
    if (dots == std::string::npos) {
        throw std::invalid_argument("iteration range must look like 3..6");
    }
    return apbf::IterationRange(std::stoi(text.substr(0, dots)),
                                std::stoi(text.substr(dots + 2)));
}

int doRun(const std::string& scenario, const std::string& mode, const std::string& lodModel,
          double scale, int frames, std::uint64_t seed, bool deterministic,
          const std::string& outDir, int dumpImages, int dumpParticles,
          const std::string& iterations) {
    const apbf::ScenarioSpec spec = apbf::buildScenario(scenario, scale);
    apbf::RunOptions opt;
    opt.mode = mode == "pbf" ? apbf::SolverMode::Pbf : apbf::SolverMode::Apbf;
    if (lodModel == "dtc") opt.lodModel = apbf::LodModel::Dtc;
    else if (lodModel == "dtvs") opt.lodModel = apbf::LodModel::Dtvs;
    if (!iterations.empty()) opt.range = parseRangeArg(iterations);
    opt.frames = frames;
    opt.seed = seed;
    opt.deterministic = deterministic;
    opt.outDir = outDir;
    opt.dumpImagesEvery = dumpImages;
    opt.dumpParticlesEvery = dumpParticles;

    const apbf::RunReport report = apbf::runScenario(spec, opt);
    for (const auto& [key, value] : report.echo) {
        std::printf("%s = %s\n", key.c_str(), value.c_str());
    }
    std::printf("median_frame_ms = %.3f\n", report.medianFrameMs());
    std::printf("total_iterations = %lld\n", report.totalIterations());
    std::printf("total_contacts = %lld\n", report.totalContacts());
    if (!report.frames.empty()) {
        std::printf("final_avg_density_pct = %.6f\n", report.frames.back().avgDensityPct);
    }
    if (!outDir.empty()) {
        std::printf("metrics = %s\n", (std::filesystem::path(outDir) / "metrics.csv").c_str());
    }
    return 0;
}

int doCompare(const std::string& ref, const std::string& test, double tolerance) {
    const apbf::MetricsFile a = apbf::readMetricsCsv(ref);
    const apbf::MetricsFile b = apbf::readMetricsCsv(test);
    const apbf::CompareResult result = apbf::compareRuns(a, b, tolerance);
    std::printf("frames = %d\n", result.frames);
    std::printf("max_avg_density_delta_pct = %.6f\n", result.maxDelta);
    std::printf("tolerance_pct = %.6f\n", tolerance);
    std::printf("verdict = %s\n", result.pass ? "PASS" : "FAIL");
    return result.pass ? 0 : 1;
}

int doBench(const std::string& scenario, const std::string& modes, int reps, int frames,
            double scale, std::uint64_t seed) {
    const apbf::ScenarioSpec spec = apbf::buildScenario(scenario, scale);
    const auto parsed = apbf::parseBenchModes(modes);
    const auto results = apbf::runBench(spec, parsed, reps, frames, seed);
    std::fputs(apbf::formatBenchReport(results).c_str(), stdout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"particle fluid simulator with camera-driven per-particle iteration budgets"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "simulate a scenario and write metrics");
    std::string scenario;
    std::string mode = "apbf";
    std::string lodModel;
    std::string iterations;
    std::string outDir = "out";
    double scale = 1.0;
    int frames = 0;
    std::uint64_t seed = 0;
    bool deterministic = false;
    int dumpImages = 0;
    int dumpParticles = 0;
    run->add_option("--scenario", scenario, "built-in name or config file path")->required();
    run->add_option("--mode", mode, "solver mode")->check(CLI::IsMember({"pbf", "apbf"}));
    run->add_option("--lod-model", lodModel, "override the scenario's LOD model")
        ->check(CLI::IsMember({"dtc", "dtvs"}));
    run->add_option("--scale", scale, "fraction of the full particle count");
    run->add_option("--frames", frames, "frame count (0: scenario default)");
    run->add_option("--seed", seed, "jitter seed");
    run->add_flag("--deterministic", deterministic,
                  "single-threaded solver passes, zeroed time column");
    run->add_option("--out", outDir, "output directory");
    run->add_option("--dump-images", dumpImages, "write a level-colored frame every k frames");
    run->add_option("--dump-particles", dumpParticles, "write a particle snapshot every k frames");
    run->add_option("--iterations", iterations, "override iteration range, e.g. 3..6");

    auto* cmp = app.add_subcommand("compare", "compare two metrics files");
    std::string refPath, testPath;
    double tolerance = 4.0;
    cmp->add_option("--ref", refPath, "reference metrics csv")->required();
    cmp->add_option("--test", testPath, "candidate metrics csv")->required();
    cmp->add_option("--tolerance-pct", tolerance, "max allowed avg-density delta");

    auto* bench = app.add_subcommand("bench", "time solver modes on one scenario");
    std::string benchScenario;
    std::string benchModes = "pbf:6,apbf:dtvs";
    int reps = 3;
    int benchFrames = 0;
    double benchScale = 1.0;
    std::uint64_t benchSeed = 0;
    bench->add_option("--scenario", benchScenario, "built-in name or config file path")
        ->required();
    bench->add_option("--modes", benchModes, "comma list, e.g. pbf:6,apbf:dtvs");
    bench->add_option("--reps", reps, "repetitions per mode");
    bench->add_option("--frames", benchFrames, "frame count (0: scenario default)");
    bench->add_option("--scale", benchScale, "fraction of the full particle count");
    bench->add_option("--seed", benchSeed, "jitter seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) {
            return doRun(scenario, mode, lodModel, scale, frames, seed, deterministic, outDir,
                         dumpImages, dumpParticles, iterations);
        }
        if (cmp->parsed()) {
            return doCompare(refPath, testPath, tolerance);
        }
        return doBench(benchScenario, benchModes, reps, benchFrames, benchScale, benchSeed);
    } catch (const apbf::NumericalError& e) {
        std::fprintf(stderr, "numerical abort: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
