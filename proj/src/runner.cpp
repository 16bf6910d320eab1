#include "runner.hpp"

#include <cstdio>
#include <string>

namespace apbf {

namespace {

std::string numStr(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string rangeStr(const IterationRange& r) {
    return std::to_string(r.nMin) + ".." + std::to_string(r.nMax);
}

std::vector<std::pair<std::string, std::string>> buildEcho(const ScenarioSpec& s,
                                                           const RunOptions& opt, int frames,
                                                           int particles) {
    std::vector<std::pair<std::string, std::string>> echo;
    echo.emplace_back("scenario", s.name);
    echo.emplace_back("scale", numStr(s.scale));
    echo.emplace_back("particles", std::to_string(particles));
    echo.emplace_back("frames", std::to_string(frames));
    echo.emplace_back("seed", std::to_string(opt.seed));
    echo.emplace_back("mode", modeName(s.solver.mode));
    echo.emplace_back("lod_model", lodModelName(s.lod.model));
    echo.emplace_back("iterations", rangeStr(s.solver.range));
    echo.emplace_back("deterministic", opt.deterministic ? "1" : "0");
    echo.emplace_back("dt_frame", numStr(s.solver.dtFrame));
    echo.emplace_back("substeps", std::to_string(s.solver.substeps));
    echo.emplace_back("rest_density", numStr(s.solver.restDensity));
    echo.emplace_back("smoothing_length", numStr(s.solver.h));
    echo.emplace_back("epsilon", numStr(s.solver.epsilon));
    echo.emplace_back("particle_radius", numStr(s.solver.effectiveParticleRadius()));
    echo.emplace_back("stab_iterations", std::to_string(s.solver.stabIterations));
    echo.emplace_back("stab_threshold", std::to_string(s.solver.effectiveStabThreshold()));
    echo.emplace_back("velocity_cap", numStr(s.solver.effectiveVelocityCap()));
    echo.emplace_back("inactive_lambda_zero", s.solver.inactiveLambdaZero ? "1" : "0");
    echo.emplace_back("jitter", numStr(s.jitter));
    return echo;
}

std::filesystem::path framePath(const std::filesystem::path& dir, const char* stem, int frame,
                                const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%06d.%s", stem, frame, ext);
    return dir / buf;
}

}  // namespace

const char* modeName(SolverMode mode) { return mode == SolverMode::Pbf ? "pbf" : "apbf"; }

const char* lodModelName(LodModel model) { return model == LodModel::Dtc ? "dtc" : "dtvs"; }

RunReport runScenario(const ScenarioSpec& spec, const RunOptions& opt) {
    ScenarioSpec s = spec;
    if (opt.range) {
        s.solver.range = *opt.range;
        s.lod.range = *opt.range;
    }
    if (opt.lodModel) s.lod.model = *opt.lodModel;
    s.solver.mode = opt.mode;
    s.solver.deterministic = opt.deterministic;
    const int frames = opt.frames > 0 ? opt.frames : s.frames;

    ParticleSet<double> state = makeState(s, opt.seed);
    Solver<double> solver(s.solver, s.scene);

    RunReport report;
    report.hash = scenarioHash(s, opt.seed);
    report.zeroTime = opt.deterministic;
    report.echo = buildEcho(s, opt, frames, state.count());
    report.frames.reserve(static_cast<size_t>(frames));

    const bool persist = !opt.outDir.empty();
    if (persist) std::filesystem::create_directories(opt.outDir);

    for (int f = 0; f < frames; ++f) {
        report.frames.push_back(solver.stepFrame(state, s.camera, s.lod, f));
        if (persist && opt.dumpImagesEvery > 0 && f % opt.dumpImagesEvery == 0) {
            const ImageRgb img =
                renderLevelImage(state.x, state.level, s.solver.effectiveParticleRadius(),
                                 s.camera, s.solver.range);
            writePpm(img, framePath(opt.outDir, "frame", f, "ppm"));
        }
        if (persist && opt.dumpParticlesEvery > 0 && f % opt.dumpParticlesEvery == 0) {
            writeParticleSnapshot(framePath(opt.outDir, "particles", f, "csv"), state);
        }
    }

    if (persist) writeMetricsCsv(opt.outDir / "metrics.csv", report);
    return report;
}

}  // namespace apbf
