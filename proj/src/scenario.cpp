#include "scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace apbf {

namespace {

Eigen::Vector3i scaledCounts(const Eigen::Vector3i& base, double scale) {
    if (!(scale > 0.0)) {
        throw std::invalid_argument("scenario scale must be positive");
    }
    const double f = std::cbrt(scale);
    Eigen::Vector3i out;
    for (int a = 0; a < 3; ++a) {
        out[a] = std::max(1, static_cast<int>(std::llround(base[a] * f)));
    }
    return out;
}

void appendNum(std::string& s, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g;", v);
    s += buf;
}

void appendVec(std::string& s, const Vec3<double>& v) {
    appendNum(s, v[0]);
    appendNum(s, v[1]);
    appendNum(s, v[2]);
}

// Shared fluid constants of all built-in scenarios.
void applyCommonDefaults(ScenarioSpec& spec) {
    spec.solver.dtFrame = 0.0016;
    spec.solver.substeps = 2;
    spec.solver.restDensity = 1000.0;
    spec.solver.h = 0.05;
    spec.solver.epsilon = 1e-5;
    spec.solver.gravity = Vec3<double>(0.0, -9.81, 0.0);
    spec.solver.stabIterations = 2;
    spec.solver.particleRadius = 0.0125;  // half the lattice spacing
    spec.scene.gradientStep = 1e-4 * spec.solver.h;
    spec.lod.model = LodModel::Dtvs;
    spec.lod.autoRange = true;
    spec.camera.verticalFov = std::numbers::pi / 3.0;
    spec.camera.width = 256;
    spec.camera.height = 256;
    spec.camera.nearClip = 1e-3;
    spec.frames = 300;
    spec.jitter = 0.005;
}

ScenarioSpec buildDamBreak(double scale) {
    ScenarioSpec spec;
    spec.name = "dam_break";
    spec.scale = scale;
    applyCommonDefaults(spec);
    spec.solver.range = IterationRange(3, 6);

    FluidBlock block;
    block.spacing = 0.025;
    block.counts = scaledCounts(Eigen::Vector3i(60, 60, 60), scale);
    const double s = block.spacing;
    block.origin = Vec3<double>(s / 2, s / 2, s / 2);
    spec.blocks.push_back(block);

    const Vec3<double> L = block.counts.cast<double>() * s;
    const Vec3<double> C(4.0 * L[0], 2.5 * L[1], L[2]);
    spec.scene.primitives.emplace_back(Box<double>(C / 2, C / 2, true));

    spec.camera.eye = Vec3<double>(1.1 * C[0], 1.2 * C[1], 2.6 * C[2]);
    spec.camera.lookAt = Vec3<double>(0.25 * C[0], 0.2 * C[1], 0.5 * C[2]);
    spec.lod.range = spec.solver.range;
    return spec;
}

ScenarioSpec buildDoubleDamBreak(double scale) {
    ScenarioSpec spec;
    spec.name = "double_dam_break";
    spec.scale = scale;
    applyCommonDefaults(spec);
    spec.solver.range = IterationRange(5, 10);

    FluidBlock block;
    block.spacing = 0.025;
    block.counts = scaledCounts(Eigen::Vector3i(58, 100, 58), scale);
    const double s = block.spacing;
    const Vec3<double> L = block.counts.cast<double>() * s;
    const Vec3<double> C(3.0 * L[0], 1.6 * L[1], L[2]);

    block.origin = Vec3<double>(s / 2, s / 2, s / 2);
    spec.blocks.push_back(block);
    block.origin = Vec3<double>(C[0] - L[0] + s / 2, s / 2, s / 2);
    spec.blocks.push_back(block);

    spec.scene.primitives.emplace_back(Box<double>(C / 2, C / 2, true));
    spec.camera.eye = Vec3<double>(0.5 * C[0], 1.3 * C[1], 3.2 * C[2]);
    spec.camera.lookAt = Vec3<double>(0.5 * C[0], 0.25 * C[1], 0.5 * C[2]);
    spec.lod.range = spec.solver.range;
    return spec;
}

ScenarioSpec buildMultiDamBreak(double scale) {
    ScenarioSpec spec;
    spec.name = "multi_dam_break";
    spec.scale = scale;
    applyCommonDefaults(spec);
    spec.solver.range = IterationRange(4, 8);

    FluidBlock block;
    block.spacing = 0.025;
    block.counts = scaledCounts(Eigen::Vector3i(35, 46, 35), scale);
    const double s = block.spacing;
    const Vec3<double> L = block.counts.cast<double>() * s;
    const double side = 3.2 * L[0];
    const double height = 2.2 * L[1];

    const double lo = s / 2;
    const double hiX = side - L[0] + s / 2;
    const double hiZ = side - L[2] + s / 2;
    for (const auto& corner :
         {Vec3<double>(lo, lo, lo), Vec3<double>(hiX, lo, lo), Vec3<double>(lo, lo, hiZ),
          Vec3<double>(hiX, lo, hiZ)}) {
        block.origin = corner;
        spec.blocks.push_back(block);
    }

    const Vec3<double> C(side, height, side);
    spec.scene.primitives.emplace_back(Box<double>(C / 2, C / 2, true));
    spec.scene.primitives.emplace_back(
        Cone<double>(Vec3<double>(side / 2, 0.0, side / 2), 0.5 * L[0], 1.2 * L[1]));

    spec.camera.eye = Vec3<double>(1.15 * side, 1.5 * height, 1.15 * side);
    spec.camera.lookAt = Vec3<double>(0.5 * side, 0.2 * height, 0.5 * side);
    spec.lod.range = spec.solver.range;
    return spec;
}

}  // namespace

int ScenarioSpec::particleCount() const {
    int total = 0;
    for (const auto& b : blocks) total += b.counts.prod();
    return total;
}

Mat3X<double> spawnBlock(const Vec3<double>& origin, const Eigen::Vector3i& counts,
                         double spacing, double jitterAmplitude, SplitMix64* rng) {
    if (counts.minCoeff() < 1) {
        throw std::invalid_argument("block counts must be at least 1 per axis");
    }
    if (!(spacing > 0.0)) {
        throw std::invalid_argument("block spacing must be positive");
    }
    Mat3X<double> pos(3, counts.prod());
    Eigen::Index col = 0;
    for (int iz = 0; iz < counts[2]; ++iz) {
        for (int iy = 0; iy < counts[1]; ++iy) {
            for (int ix = 0; ix < counts[0]; ++ix) {
                Vec3<double> p = origin + spacing * Vec3<double>(ix, iy, iz);
                if (rng != nullptr && jitterAmplitude > 0.0) {
                    p += jitterAmplitude * Vec3<double>(rng->symmetric(), rng->symmetric(),
                                                        rng->symmetric());
                }
                pos.col(col++) = p;
            }
        }
    }
    return pos;
}

Mat3X<double> spawnScenario(const ScenarioSpec& spec, std::uint64_t seed) {
    SplitMix64 rng(seed);
    Mat3X<double> pos(3, spec.particleCount());
    Eigen::Index at = 0;
    for (const auto& b : spec.blocks) {
        const double amp = spec.jitter * b.spacing;
        const Mat3X<double> block = spawnBlock(b.origin, b.counts, b.spacing, amp, &rng);
        pos.middleCols(at, block.cols()) = block;
        at += block.cols();
    }
    return pos;
}

ParticleSet<double> makeState(const ScenarioSpec& spec, std::uint64_t seed) {
    if (spec.blocks.empty()) {
        throw std::invalid_argument("scenario has no fluid blocks");
    }
    const Mat3X<double> pos = spawnScenario(spec, seed);
    const double s = spec.blocks.front().spacing;
    const double mass = spec.solver.restDensity * s * s * s;
    return ParticleSet<double>(pos, mass, spec.solver.range.nMax);
}

ScenarioSpec buildScenario(const std::string& nameOrPath, double scale) {
    if (nameOrPath == "dam_break") return buildDamBreak(scale);
    if (nameOrPath == "double_dam_break") return buildDoubleDamBreak(scale);
    if (nameOrPath == "multi_dam_break") return buildMultiDamBreak(scale);
    if (std::filesystem::exists(nameOrPath)) return loadScenarioFile(nameOrPath, scale);
    throw std::invalid_argument(
        "unknown scenario '" + nameOrPath +
        "'; valid names: dam_break, double_dam_break, multi_dam_break, or a config file path");
}

namespace {

struct Parser {
    std::string file;
    int lineNo = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw std::runtime_error(file + ":" + std::to_string(lineNo) + ": " + msg);
    }

    double num(const std::string& v) const {
        try {
            size_t used = 0;
            const double d = std::stod(v, &used);
            if (used != v.size()) fail("trailing characters in number '" + v + "'");
            return d;
        } catch (const std::invalid_argument&) {
            fail("expected a number, got '" + v + "'");
        } catch (const std::out_of_range&) {
            fail("number out of range: '" + v + "'");
        }
    }

    int integer(const std::string& v) const {
        const double d = num(v);
        const int i = static_cast<int>(std::llround(d));
        if (double(i) != d) fail("expected an integer, got '" + v + "'");
        return i;
    }

    bool boolean(const std::string& v) const {
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        fail("expected a boolean, got '" + v + "'");
    }

    std::vector<std::string> tokens(const std::string& v) const {
        std::vector<std::string> out;
        std::istringstream is(v);
        std::string t;
        while (is >> t) out.push_back(t);
        return out;
    }

    Vec3<double> vec3(const std::string& v) const {
        const auto t = tokens(v);
        if (t.size() != 3) fail("expected three numbers, got '" + v + "'");
        return Vec3<double>(num(t[0]), num(t[1]), num(t[2]));
    }

    IterationRange range(const std::string& v) const {
        const auto dots = v.find("..");
        if (dots == std::string::npos) fail("expected a range like 3..6, got '" + v + "'");
        const int lo = integer(v.substr(0, dots));
        const int hi = integer(v.substr(dots + 2));
        try {
            return IterationRange(lo, hi);
        } catch (const std::invalid_argument& e) {
            fail(e.what());
        }
    }
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

SdfPrimitive<double> parsePrimitive(const Parser& p, const std::string& value) {
    const auto t = p.tokens(value);
    if (t.empty()) p.fail("empty primitive");
    auto interiorFlag = [&](size_t at) {
        if (t.size() == at) return false;
        if (t.size() == at + 1 && t[at] == "interior") return true;
        if (t.size() == at + 1 && t[at] == "exterior") return false;
        p.fail("unexpected trailing primitive arguments");
    };
    try {
        if (t[0] == "half_space") {
            if (t.size() != 5) p.fail("half_space needs: nx ny nz offset");
            return HalfSpace<double>(Vec3<double>(p.num(t[1]), p.num(t[2]), p.num(t[3])),
                                     p.num(t[4]));
        }
        if (t[0] == "sphere") {
            if (t.size() < 5) p.fail("sphere needs: cx cy cz radius [interior]");
            return Sphere<double>(Vec3<double>(p.num(t[1]), p.num(t[2]), p.num(t[3])),
                                  p.num(t[4]), interiorFlag(5));
        }
        if (t[0] == "box") {
            if (t.size() < 7) p.fail("box needs: cx cy cz hx hy hz [interior]");
            return Box<double>(Vec3<double>(p.num(t[1]), p.num(t[2]), p.num(t[3])),
                               Vec3<double>(p.num(t[4]), p.num(t[5]), p.num(t[6])),
                               interiorFlag(7));
        }
        if (t[0] == "cone") {
            if (t.size() != 6) p.fail("cone needs: bx by bz radius height");
            return Cone<double>(Vec3<double>(p.num(t[1]), p.num(t[2]), p.num(t[3])),
                                p.num(t[4]), p.num(t[5]));
        }
    } catch (const std::invalid_argument& e) {
        p.fail(e.what());
    }
    p.fail("unknown primitive kind '" + t[0] + "'");
}

}  // namespace

ScenarioSpec loadScenarioFile(const std::filesystem::path& path, double scale) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("cannot open scenario file: " + path.string());
    }
    ScenarioSpec spec;
    spec.name = path.stem().string();
    spec.scale = scale;
    applyCommonDefaults(spec);
    spec.solver.range = IterationRange(3, 6);

    Parser p;
    p.file = path.string();
    std::string section;
    std::string line;
    bool gradientStepSet = false;
    std::vector<Eigen::Vector3i> rawCounts;

    while (std::getline(is, line)) {
        ++p.lineNo;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') p.fail("unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section == "fluid") {
                spec.blocks.emplace_back();
                rawCounts.emplace_back(Eigen::Vector3i::Ones());
            } else if (section != "solver" && section != "lod" && section != "camera" &&
                       section != "scene") {
                p.fail("unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) p.fail("expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (section.empty()) {
            if (key == "name") spec.name = value;
            else if (key == "frames") spec.frames = p.integer(value);
            else if (key == "jitter") spec.jitter = p.num(value);
            else p.fail("unknown key '" + key + "'");
        } else if (section == "solver") {
            if (key == "dt_frame") spec.solver.dtFrame = p.num(value);
            else if (key == "substeps") spec.solver.substeps = p.integer(value);
            else if (key == "iterations") spec.solver.range = p.range(value);
            else if (key == "rest_density") spec.solver.restDensity = p.num(value);
            else if (key == "smoothing_length") spec.solver.h = p.num(value);
            else if (key == "epsilon") spec.solver.epsilon = p.num(value);
            else if (key == "gravity") spec.solver.gravity = p.vec3(value);
            else if (key == "stab_iterations") spec.solver.stabIterations = p.integer(value);
            else if (key == "stab_threshold") spec.solver.stabThreshold = p.integer(value);
            else if (key == "particle_radius") spec.solver.particleRadius = p.num(value);
            else if (key == "velocity_cap") spec.solver.velocityCap = p.num(value);
            else if (key == "inactive_lambda_zero") spec.solver.inactiveLambdaZero = p.boolean(value);
            else p.fail("unknown solver key '" + key + "'");
        } else if (section == "lod") {
            if (key == "model") {
                if (value == "dtc") spec.lod.model = LodModel::Dtc;
                else if (value == "dtvs") spec.lod.model = LodModel::Dtvs;
                else p.fail("lod model must be dtc or dtvs");
            } else if (key == "auto_range") spec.lod.autoRange = p.boolean(value);
            else if (key == "d_min") spec.lod.dMin = p.num(value);
            else if (key == "d_max") spec.lod.dMax = p.num(value);
            else p.fail("unknown lod key '" + key + "'");
        } else if (section == "camera") {
            if (key == "eye") spec.camera.eye = p.vec3(value);
            else if (key == "look_at") spec.camera.lookAt = p.vec3(value);
            else if (key == "up") spec.camera.up = p.vec3(value);
            else if (key == "fov_deg") spec.camera.verticalFov = p.num(value) * std::numbers::pi / 180.0;
            else if (key == "resolution") {
                const auto t = p.tokens(value);
                if (t.size() != 2) p.fail("resolution needs two integers");
                spec.camera.width = p.integer(t[0]);
                spec.camera.height = p.integer(t[1]);
            } else if (key == "near") spec.camera.nearClip = p.num(value);
            else p.fail("unknown camera key '" + key + "'");
        } else if (section == "scene") {
            if (key == "primitive") spec.scene.primitives.push_back(parsePrimitive(p, value));
            else if (key == "gradient_step") {
                spec.scene.gradientStep = p.num(value);
                gradientStepSet = true;
            } else p.fail("unknown scene key '" + key + "'");
        } else if (section == "fluid") {
            auto& block = spec.blocks.back();
            if (key == "origin") block.origin = p.vec3(value);
            else if (key == "counts") {
                const auto t = p.tokens(value);
                if (t.size() != 3) p.fail("counts needs three integers");
                rawCounts.back() =
                    Eigen::Vector3i(p.integer(t[0]), p.integer(t[1]), p.integer(t[2]));
            } else if (key == "spacing") block.spacing = p.num(value);
            else p.fail("unknown fluid key '" + key + "'");
        }
    }

    if (spec.blocks.empty()) {
        throw std::runtime_error(path.string() + ": scenario file declares no [fluid] block");
    }
    for (size_t b = 0; b < spec.blocks.size(); ++b) {
        spec.blocks[b].counts = scaledCounts(rawCounts[b], scale);
    }
    if (!gradientStepSet) spec.scene.gradientStep = 1e-4 * spec.solver.h;
    spec.lod.range = spec.solver.range;
    spec.solver.validate();
    spec.lod.validate();
    spec.camera.validate();
    return spec;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (const unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    return hash;
}

std::uint64_t scenarioHash(const ScenarioSpec& spec, std::uint64_t seed) {
    std::string s;
    s += spec.name + ";";
    appendNum(s, spec.scale);
    appendNum(s, double(seed));
    appendNum(s, spec.jitter);
    for (const auto& b : spec.blocks) {
        appendVec(s, b.origin);
        appendNum(s, b.counts[0]);
        appendNum(s, b.counts[1]);
        appendNum(s, b.counts[2]);
        appendNum(s, b.spacing);
    }
    for (const auto& prim : spec.scene.primitives) {
        std::visit(
            [&](const auto& g) {
                using T = std::decay_t<decltype(g)>;
                if constexpr (std::is_same_v<T, HalfSpace<double>>) {
                    s += "half_space;";
                    appendVec(s, g.normal);
                    appendNum(s, g.offset);
                } else if constexpr (std::is_same_v<T, Sphere<double>>) {
                    s += "sphere;";
                    appendVec(s, g.center);
                    appendNum(s, g.radius);
                    appendNum(s, g.interior ? 1 : 0);
                } else if constexpr (std::is_same_v<T, Box<double>>) {
                    s += "box;";
                    appendVec(s, g.center);
                    appendVec(s, g.halfExtents);
                    appendNum(s, g.interior ? 1 : 0);
                } else {
                    s += "cone;";
                    appendVec(s, g.baseCenter);
                    appendNum(s, g.baseRadius);
                    appendNum(s, g.height);
                }
            },
            prim);
    }
    appendNum(s, spec.scene.gradientStep);
    appendVec(s, spec.camera.eye);
    appendVec(s, spec.camera.lookAt);
    appendVec(s, spec.camera.up);
    appendNum(s, spec.camera.verticalFov);
    appendNum(s, spec.camera.width);
    appendNum(s, spec.camera.height);
    appendNum(s, spec.camera.nearClip);
    appendNum(s, spec.solver.dtFrame);
    appendNum(s, spec.solver.substeps);
    appendNum(s, spec.solver.restDensity);
    appendNum(s, spec.solver.h);
    appendNum(s, spec.solver.epsilon);
    appendVec(s, spec.solver.gravity);
    appendNum(s, spec.solver.effectiveParticleRadius());
    appendNum(s, spec.solver.effectiveVelocityCap());
    appendNum(s, spec.solver.inactiveLambdaZero ? 1 : 0);
    return fnv1a64(s);
}

}  // namespace apbf
