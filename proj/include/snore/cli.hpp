#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "errors.hpp"
#include "forward_models.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "priors.hpp"
#include "solvers.hpp"
#include "tensor.hpp"
#include "verify.hpp"

namespace snore::cli {

enum class ExitCode : int { Ok = 0, Failure = 1, Usage = 2, Io = 3, Diverged = 4, CheckFailed = 5 };

enum class LogLevel { Quiet, Info, Debug };

inline LogLevel log_level_from_env()
{
    const char* v = std::getenv("SNORE_LOG");
    if (!v) return LogLevel::Info;
    const std::string s(v);
    if (s == "quiet") return LogLevel::Quiet;
    if (s == "debug") return LogLevel::Debug;
    return LogLevel::Info;
}

// Every flag the tool understands, in manifest order. Noise levels are in 8-bit units (10 means 10/255).
inline const std::vector<std::string>& known_keys()
{
    static const std::vector<std::string> keys = {
        "algo",  "task",      "input",  "truth",      "kernel", "mask",  "gmm",      "factor", "looks",
        "smoothing", "sigma-y", "alpha", "alpha-last", "sigma", "sigma-last", "levels", "iters", "tail-iters",
        "delta", "decay",     "beta",   "init",       "seed",   "log-every", "suite", "sigmas", "out"};
    return keys;
}

// Thrown by parse_job for --help; what() holds the usage text.
struct HelpRequested : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct JobSpec {
    std::string command;
    std::string task = "deblur";
    Algorithm algorithm = Algorithm::SnoreAnnealed;
    std::filesystem::path input, truth, kernel, mask, gmm, out_dir = "out";
    double sigma_y = 10.0 / 255.0;
    std::size_t factor = 2;
    double looks = 1.0;
    double smoothing = 4.0;
    // Schedule and step in preset units (see detail::fidelity_scale).
    AnnealingSchedule schedule = AnnealingSchedule::single(0.1, 1.0, 1);
    StepRule step = StepRule::constant(0.1);
    // Curvature scale of the fidelity used to map preset units onto the solver.
    double fidelity_scale = 1.0;
    // What the solver actually runs.
    RunConfig run;
    std::string init_text = "obs";
    std::uint64_t seed = 0;
    std::string suite = "all";
    std::vector<double> sigmas;
    // Fully resolved settings, written verbatim to the manifest.
    std::vector<std::pair<std::string, std::string>> resolved;
};

namespace detail {

inline double parse_real(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || !std::isfinite(x)) throw ValueError("--" + key + ": expected a real number, got '" + v + "'");
    return x;
}

inline std::uint64_t parse_count(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    unsigned long long x = 0;
    try {
        if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
        x = std::stoull(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty()) throw ValueError("--" + key + ": expected a non-negative integer, got '" + v + "'");
    return x;
}

inline void check(bool ok, const std::string& key, const std::string& constraint)
{
    if (!ok) throw ValueError("--" + key + ": " + constraint);
}

inline std::map<std::string, std::string> read_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("config file '" + path.string() + "' not found");
    std::map<std::string, std::string> out;
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (auto p = line.find('#'); p != std::string::npos) line.erase(p);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValueError("config '" + path.string() + "' line " + std::to_string(no) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        bool known = false;
        for (const auto& k : known_keys()) known = known || k == key;
        if (!known) throw ValueError("config '" + path.string() + "' line " + std::to_string(no) + ": unknown key '" + key + "'");
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

inline void require_file(const std::filesystem::path& p, const std::string& key)
{
    if (!std::filesystem::is_regular_file(p)) throw IoError("--" + key + ": file '" + p.string() + "' does not exist");
}

// Preset units: the regularization step is alpha * delta * (x - D(x)) and the data step is delta
// times the fidelity gradient divided by `scale`. Gaussian fidelities are read with sigma_y in 8-bit
// units (scale 255^2), the speckle fidelity per look.
inline double fidelity_scale(const std::string& task, double looks)
{
    if (task == "deblur" || task == "sr") return 255.0 * 255.0;
    if (task == "despeckle") return looks;
    return 1.0;
}

// Solver alpha = preset alpha * sigma^2 * scale, so that solver alpha * solver delta / sigma^2 = alpha * delta.
inline AnnealingSchedule to_solver_units(const AnnealingSchedule& preset, double scale)
{
    std::vector<Level> out;
    for (const auto& l : preset.levels()) out.push_back({l.sigma, l.alpha * l.sigma * l.sigma * scale, l.iterations});
    return AnnealingSchedule(std::move(out));
}

struct TaskDefaults {
    double alpha, alpha_last, sigma, sigma_last, delta, beta = 0.0;
    std::size_t iters, levels = 1, tail = 0;
};

// Defaults per (task, algorithm). Noise levels in [0,1] units.
inline TaskDefaults defaults_for(const std::string& task, Algorithm a, double sy)
{
    const bool annealed = a == Algorithm::SnoreAnnealed || a == Algorithm::SnoreProx;
    if (task == "inpaint") {
        if (annealed) return {0.15, a == Algorithm::SnoreProx ? 0.15 : 0.4, 50.0 / 255, 5.0 / 255,
                              a == Algorithm::SnoreProx ? 1.0 : 0.5, 0.0, 500, 16, 100};
        if (a == Algorithm::Snore) return {0.4, 0.4, 5.0 / 255, 5.0 / 255, 0.5, 0.0, 500};
        if (a == Algorithm::PnpSgd) return {0.15, 0.15, 10.0 / 255, 10.0 / 255, 0.5, 0.01, 500};
        return {0.15, 0.15, 10.0 / 255, 10.0 / 255, a == Algorithm::RedProx ? 0.5 : 1.0 / 0.15, 0.0, 500};
    }
    if (task == "sr") {
        if (annealed) return {0.02, 0.3, 4 * sy, 2 * sy, 1.0, 0.0, 400, 16, 80};
        if (a == Algorithm::Snore) return {0.3, 0.3, 2 * sy, 2 * sy, 1.0, 0.0, 400};
        if (a == Algorithm::PnpSgd) return {0.065, 0.065, 2 * sy, 2 * sy, 0.1, 0.01, 400};
        return {0.065, 0.065, 2 * sy, 2 * sy, 1.0 / 0.065, 0.0, 400};
    }
    if (task == "despeckle") {
        if (annealed) return {80, 80, 30.0 / 255, 10.0 / 255, 0.01, 0.0, 100, 16, 20};
        if (a == Algorithm::PnpSgd) return {80, 80, 10.0 / 255, 10.0 / 255, 0.01, 0.01, 100};
        return {80, 80, 10.0 / 255, 10.0 / 255, 0.01, 0.0, 100};
    }
    // deblur
    const bool strong = sy >= 20.0 / 255;
    switch (a) {
    case Algorithm::Red: return {0.1, 0.1, 1.8 * sy, 1.8 * sy, 1.0 / 0.1, 0.0, 100};
    case Algorithm::RedProx: {
        const double al = strong ? 0.3 : 0.2;
        return {al, al, (strong ? 1.8 : 1.4) * sy, (strong ? 1.8 : 1.4) * sy, 1.0 / al, 0.0, 100};
    }
    case Algorithm::PnpSgd: return {0.5, 0.5, sy, sy, 0.1, 0.01, 1000};
    case Algorithm::Snore: return {1.0, 1.0, 0.5 * sy, 0.5 * sy, 0.1, 0.0, 1500};
    default: return {0.1, 1.0, 1.8 * sy, 0.5 * sy, 0.1, 0.0, 1500, 16, 300};
    }
}

} // namespace detail

// argv[0] is skipped. Flags override values from --config.
inline JobSpec parse_job(const std::vector<std::string>& args)
{
    CLI::App app{"SNORE restoration toolkit"};
    std::string command;
    app.add_option("command", command, "degrade | restore | verify | landscape")->required();
    std::map<std::string, std::string> flags;
    std::string config;
    app.add_option("--config", config, "key=value file");
    for (const auto& k : known_keys()) app.add_option("--" + k, flags[k]);
    std::vector<std::string> argv_rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequested(app.help());
    } catch (const CLI::ParseError& e) {
        throw ValueError(std::string(e.what()));
    }

    std::map<std::string, std::string> v;
    if (!config.empty()) v = detail::read_config(config);
    for (const auto& k : known_keys())
        if (app.count("--" + k)) v[k] = flags[k];

    JobSpec job;
    job.command = command;
    if (command != "degrade" && command != "restore" && command != "verify" && command != "landscape")
        throw ValueError("unknown command '" + command + "' (degrade, restore, verify, landscape)");
    auto has = [&](const std::string& k) { return v.count(k) > 0; };
    auto real = [&](const std::string& k) { return detail::parse_real(k, v.at(k)); };
    auto count = [&](const std::string& k) { return detail::parse_count(k, v.at(k)); };

    if (has("out")) job.out_dir = v["out"];
    if (has("seed")) job.seed = count("seed");
    if (has("task")) job.task = v["task"];
    detail::check(job.task == "deblur" || job.task == "inpaint" || job.task == "sr" || job.task == "despeckle", "task",
                  "must be one of deblur, inpaint, sr, despeckle");
    if (has("algo")) {
        try {
            job.algorithm = parse_algorithm(v["algo"]);
        } catch (const ValueError&) {
            throw ValueError("--algo: must be one of red, red-prox, snore, snore-annealed, snore-prox, pnp-sgd");
        }
    }
    if (has("sigma-y")) job.sigma_y = real("sigma-y") / 255.0;
    detail::check(job.sigma_y > 0.0, "sigma-y", "must be > 0");
    if (has("factor")) job.factor = count("factor");
    detail::check(job.factor >= 1, "factor", "must be >= 1");
    if (has("looks")) job.looks = real("looks");
    detail::check(job.looks > 0.0, "looks", "must be > 0");
    if (has("smoothing")) job.smoothing = real("smoothing");
    detail::check(job.smoothing > 0.0, "smoothing", "must be > 0");
    for (const char* k : {"input", "truth", "kernel", "mask", "gmm"})
        if (has(k)) {
            std::filesystem::path p = v[k];
            detail::require_file(p, k);
            if (std::string(k) == "input") job.input = p;
            else if (std::string(k) == "truth") job.truth = p;
            else if (std::string(k) == "kernel") job.kernel = p;
            else if (std::string(k) == "mask") job.mask = p;
            else job.gmm = p;
        }
    if ((command == "degrade" || command == "restore") && job.input.empty())
        throw ValueError("--input: required for " + command);
    if (command == "restore" && job.task == "inpaint" && job.mask.empty())
        throw ValueError("--mask: required to restore an inpainting observation");

    // Solver configuration.
    const auto d = detail::defaults_for(job.task, job.algorithm, job.sigma_y);
    const bool annealed = job.algorithm == Algorithm::SnoreAnnealed || job.algorithm == Algorithm::SnoreProx;
    const double sigma = has("sigma") ? real("sigma") / 255.0 : d.sigma;
    const double alpha = has("alpha") ? real("alpha") : d.alpha;
    detail::check(sigma > 0.0, "sigma", "must be > 0");
    detail::check(alpha > 0.0, "alpha", "must be > 0");
    const std::size_t iters = has("iters") ? count("iters") : d.iters;
    const double delta = has("delta") ? real("delta") : d.delta;
    detail::check(delta > 0.0, "delta", "must be > 0");
    if (annealed) {
        const double sigma_last = has("sigma-last") ? real("sigma-last") / 255.0 : d.sigma_last;
        const double alpha_last = has("alpha-last") ? real("alpha-last") : d.alpha_last;
        const std::size_t levels = has("levels") ? count("levels") : d.levels;
        const std::size_t tail = has("tail-iters") ? count("tail-iters") : d.tail;
        detail::check(sigma_last > 0.0, "sigma-last", "must be > 0");
        detail::check(alpha_last > 0.0, "alpha-last", "must be > 0");
        detail::check(levels >= 1, "levels", "must be >= 1");
        detail::check(levels == 1 ? sigma == sigma_last : sigma > sigma_last, "sigma",
                      "must exceed --sigma-last (equal when --levels 1)");
        detail::check(tail <= iters && iters - tail >= levels, "iters",
                      "must leave at least one iteration per level after --tail-iters");
        job.schedule = build_linear_schedule(sigma, sigma_last, alpha, alpha_last, levels, iters, tail);
    } else {
        detail::check(iters >= 1, "iters", "must be >= 1");
        job.schedule = AnnealingSchedule::single(sigma, alpha, iters);
    }
    job.run.algorithm = job.algorithm;
    if (has("decay")) {
        const double a = real("decay");
        detail::check(a > 0.5 && a <= 1.0, "decay", "exponent must lie in (0.5, 1]");
        job.step = StepRule::decaying(delta, a);
    } else {
        job.step = StepRule::constant(delta);
    }
    job.fidelity_scale = detail::fidelity_scale(job.task, job.looks);
    job.run.schedule = detail::to_solver_units(job.schedule, job.fidelity_scale);
    job.run.step = job.step;
    job.run.step.delta = job.step.delta / job.fidelity_scale;
    const double beta = has("beta") ? real("beta") : d.beta;
    detail::check(beta >= 0.0, "beta", "must be >= 0");
    detail::check(beta == 0.0 || job.algorithm == Algorithm::PnpSgd, "beta", "only applies to --algo pnp-sgd");
    job.run.sgd_noise = job.algorithm == Algorithm::PnpSgd ? beta : 0.0;
    job.run.options.seed = job.seed;
    if (has("log-every")) job.run.options.log_every = count("log-every");
    detail::check(job.run.options.log_every >= 1, "log-every", "must be >= 1");

    job.init_text = has("init") ? v["init"] : "obs";
    if (job.init_text == "obs") job.run.options.init = InitObservation{};
    else if (job.init_text == "random") job.run.options.init = InitRandom{};
    else if (job.init_text.rfind("const:", 0) == 0) job.run.options.init = InitConstant{detail::parse_real("init", job.init_text.substr(6))};
    else if (job.init_text.rfind("file:", 0) == 0) {
        const std::filesystem::path p = job.init_text.substr(5);
        detail::require_file(p, "init");
        job.run.options.init = InitProvided{io::read_pnm(p)};
    } else throw ValueError("--init: must be obs, const:VAL, file:PATH or random");

    if (has("suite")) job.suite = v["suite"];
    detail::check(job.suite == "all" || job.suite == "rates" || job.suite == "unbiased" || job.suite == "critical" ||
                      job.suite == "drift" || job.suite == "noise" || job.suite == "landscape",
                  "suite", "must be one of all, rates, unbiased, critical, drift, noise, landscape");
    job.sigmas = {0.1, 0.25, 0.5, 0.75, 1.0};
    if (has("sigmas")) {
        job.sigmas.clear();
        std::stringstream ss(v["sigmas"]);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            job.sigmas.push_back(detail::parse_real("sigmas", tok));
            detail::check(job.sigmas.back() > 0.0, "sigmas", "entries must be > 0");
        }
        detail::check(!job.sigmas.empty(), "sigmas", "needs at least one value");
    }

    // Manifest: everything that determines the outputs.
    auto& r = job.resolved;
    r.emplace_back("command", job.command);
    r.emplace_back("task", job.task);
    r.emplace_back("algo", to_string(job.algorithm));
    r.emplace_back("input", job.input.string());
    r.emplace_back("truth", job.truth.string());
    r.emplace_back("kernel", job.kernel.empty() ? "builtin" : job.kernel.string());
    r.emplace_back("mask", job.mask.string());
    r.emplace_back("gmm", job.gmm.string());
    r.emplace_back("sigma_y", io::fmt(job.sigma_y));
    r.emplace_back("factor", std::to_string(job.factor));
    r.emplace_back("looks", io::fmt(job.looks));
    r.emplace_back("smoothing", io::fmt(job.smoothing));
    for (std::size_t i = 0; i < job.schedule.size(); ++i) {
        const auto& l = job.schedule.levels()[i];
        r.emplace_back("level" + std::to_string(i), "sigma=" + io::fmt(l.sigma) + " alpha=" + io::fmt(l.alpha) +
                                                        " iters=" + std::to_string(l.iterations) + " solver_alpha=" +
                                                        io::fmt(job.run.schedule.levels()[i].alpha));
    }
    r.emplace_back("step", (job.step.kind == StepRule::Kind::Constant
                                ? "constant delta=" + io::fmt(job.step.delta)
                                : "decaying delta=" + io::fmt(job.step.delta) + " a=" + io::fmt(job.step.exponent)) +
                               " solver_delta=" + io::fmt(job.run.step.delta));
    r.emplace_back("fidelity_scale", io::fmt(job.fidelity_scale));
    r.emplace_back("beta", io::fmt(job.run.sgd_noise));
    r.emplace_back("init", job.init_text);
    r.emplace_back("log_every", std::to_string(job.run.options.log_every));
    r.emplace_back("suite", job.suite);
    std::string sig;
    for (double s : job.sigmas) sig += (sig.empty() ? "" : ",") + io::fmt(s);
    r.emplace_back("sigmas", sig);
    r.emplace_back("out", job.out_dir.string());
    r.emplace_back("seed", std::to_string(job.seed));
    return job;
}

inline JobSpec parse_job(int argc, const char* const* argv)
{
    return parse_job(std::vector<std::string>(argv, argv + argc));
}

namespace detail {

// 5x5 bent motion streak: diagonal, horizontal, diagonal.
inline ImageGrid builtin_motion_kernel()
{
    ImageGrid k(5, 5, 1);
    const std::size_t taps[7][2] = {{0, 0}, {1, 1}, {2, 2}, {2, 3}, {2, 4}, {3, 4}, {4, 4}};
    for (const auto& t : taps) k(t[0], t[1]) = 1.0 / 7.0;
    return k;
}

// Separable [1 2 1]/4 blur.
inline ImageGrid builtin_sr_kernel()
{
    ImageGrid k(3, 3, 1);
    const double t[3] = {0.25, 0.5, 0.25};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) k(i, j) = t[i] * t[j];
    return k;
}

inline ImageGrid kernel_for(const JobSpec& job)
{
    if (!job.kernel.empty()) return io::read_kernel(job.kernel);
    return job.task == "sr" ? builtin_sr_kernel() : builtin_motion_kernel();
}

inline double log_floor() { return std::log(1.0 / 255.0); }

inline ImageGrid to_log(const ImageGrid& img)
{
    return map(img, [](double v) { return std::log(std::max(v, 1.0 / 255.0)); });
}

inline ImageGrid from_log(const ImageGrid& img)
{
    return map(img, [](double v) { return std::exp(v); });
}

inline void write_manifest(const JobSpec& job)
{
    std::ofstream out(job.out_dir / "manifest.txt", std::ios::binary);
    if (!out) throw IoError("cannot write manifest in '" + job.out_dir.string() + "'");
    for (const auto& [k, val] : job.resolved) out << k << "=" << val << "\n";
}

inline DegradationModel model_for(const JobSpec& job, Shape clean)
{
    if (job.task == "deblur") return DegradationModel::circular_blur(kernel_for(job), job.sigma_y, clean);
    if (job.task == "sr") return DegradationModel::decimated_blur(kernel_for(job), job.factor, job.sigma_y, clean);
    if (job.task == "despeckle") return DegradationModel::speckle(job.looks, clean);
    require(!job.mask.empty(), "inpainting needs a mask");
    return DegradationModel::mask(io::read_mask(job.mask), clean);
}

inline DenoiserHandle denoiser_for(const JobSpec& job, Shape shape)
{
    if (job.gmm.empty()) return smoothing_denoiser(job.smoothing, shape);
    auto prior = std::make_shared<const GmmPrior>(read_gmm(job.gmm));
    const auto p = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(prior->dimension()))));
    if (p * p != prior->dimension()) throw ValueError("--gmm: dimension must be a square patch size");
    return patch_denoiser(prior, p, shape);
}

inline ExitCode degrade(const JobSpec& job, std::ostream& log, LogLevel level)
{
    ImageGrid clean = io::read_pnm(job.input);
    SeedStream stream(job.seed);
    if (job.task == "inpaint" && job.mask.empty()) {
        // random half mask, reproducible from the seed
        SeedStream ms = stream.split(7);
        ImageGrid m(clean.height(), clean.width(), 1);
        for (std::size_t k = 0; k < m.size(); ++k) m[k] = ms.uniform() < 0.5 ? 1.0 : 0.0;
        io::write_pnm(job.out_dir / "mask.pgm", m);
        JobSpec with_mask = job;
        with_mask.mask = job.out_dir / "mask.pgm";
        return degrade(with_mask, log, level);
    }
    const ImageGrid x = job.task == "despeckle" ? to_log(clean) : clean;
    const auto model = model_for(job, x.shape());
    const ImageGrid y = model.degrade(x, stream);
    io::write_pnm(job.out_dir / "observed.pnm", job.task == "despeckle" ? from_log(y) : y);
    if (level != LogLevel::Quiet)
        log << "degrade task=" << job.task << " model=" << model.name() << " shape=" << y.shape().str()
            << " out=" << (job.out_dir / "observed.pnm").string() << "\n";
    return ExitCode::Ok;
}

inline ExitCode restore(const JobSpec& job, std::ostream& log, LogLevel level)
{
    ImageGrid y = io::read_pnm(job.input);
    if (job.task == "despeckle") y = to_log(y);
    Shape clean{y.height(), y.width(), y.channels()};
    if (job.task == "sr") clean = Shape{y.height() * job.factor, y.width() * job.factor, y.channels()};
    const auto model = model_for(job, clean);
    const auto denoiser = denoiser_for(job, clean);
    RunConfig cfg = job.run;
    std::optional<ImageGrid> truth;
    if (!job.truth.empty()) {
        truth = io::read_pnm(job.truth);
        if (truth->shape() != clean) throw ShapeError("--truth: shape " + truth->shape().str() + ", expected " + clean.str());
        cfg.options.ground_truth = job.task == "despeckle" ? to_log(*truth) : *truth;
    }
    if (level == LogLevel::Debug)
        log << "restore " << to_string(cfg.algorithm) << " denoiser=" << denoiser.descriptor()
            << " levels=" << cfg.schedule.size() << " iters=" << cfg.schedule.total_iterations() << "\n";
    const RunResult res = run(model, denoiser, y, cfg);
    const ImageGrid restored = job.task == "despeckle" ? from_log(res.x) : res.x;
    io::write_pnm(job.out_dir / "restored.pnm", restored);
    {
        std::ofstream t(job.out_dir / "trajectory.csv", std::ios::binary);
        res.trajectory.write_csv(t);
    }
    {
        std::ofstream m(job.out_dir / "metrics.csv", std::ios::binary);
        m << "image,psnr,ssim,sigma_hat\n";
        const double sh = restored.height() >= 2 && restored.width() >= 2 ? estimate_noise(restored) : std::nan("");
        if (truth) {
            const auto rep = evaluate(restored, *truth);
            m << "restored," << io::fmt(rep.psnr) << "," << io::fmt(rep.ssim) << "," << io::fmt(sh) << "\n";
            if (job.task != "sr") {
                const ImageGrid obs = job.task == "despeckle" ? from_log(y) : y;
                const auto o = evaluate(obs, *truth);
                m << "observed," << io::fmt(o.psnr) << "," << io::fmt(o.ssim) << "," << io::fmt(o.sigma_hat) << "\n";
            }
        } else {
            m << "restored,,," << io::fmt(sh) << "\n";
        }
    }
    if (level != LogLevel::Quiet) {
        log << "restore algo=" << to_string(cfg.algorithm) << " task=" << job.task << " iters=" << res.iterations
            << " estimator=" << res.trajectory.gradient_estimator;
        if (truth) log << " psnr=" << io::fmt(psnr(restored, *truth));
        log << (res.diverged ? " DIVERGED" : "") << "\n";
    }
    return res.diverged ? ExitCode::Diverged : ExitCode::Ok;
}

inline ExitCode landscape(const JobSpec& job, std::ostream& log, LogLevel level)
{
    const GmmPrior prior = job.gmm.empty() ? verify::bundled_gmm3() : read_gmm(job.gmm);
    const auto csv = verify::landscape_1d(prior, job.sigmas, -6.0, 6.0, 1201);
    const auto path = verify::write_csv(job.out_dir, "landscape", job.seed, csv);
    if (level != LogLevel::Quiet) log << "landscape rows=" << csv.rows.size() << " out=" << path.string() << "\n";
    return ExitCode::Ok;
}

inline ExitCode verify_suite(const JobSpec& job, std::ostream& log, LogLevel level)
{
    bool ok = true;
    auto report = [&](const std::string& name, bool pass, const std::string& detail) {
        ok = ok && pass;
        if (level != LogLevel::Quiet) log << (pass ? "PASS " : "FAIL ") << name << " " << detail << "\n";
    };
    const auto want = [&](const char* s) { return job.suite == "all" || job.suite == s; };
    const std::uint64_t seed = job.seed;

    if (want("rates")) {
        const auto r = verify::rate_sweep(verify::bundled_gmm3(), -4.0, 4.0, {0.5, 0.35, 0.25, 0.18, 0.125});
        verify::write_csv(job.out_dir, "rates", seed, verify::rate_csv(r));
        bool dominated = true;
        for (std::size_t i = 0; i < r.pnp.readings.size(); ++i) dominated = dominated && r.snore.readings[i] >= r.pnp.readings[i];
        report("rates", r.pnp.tolerance_met && std::abs(r.pnp.fitted_slope - 2.0) <= 0.3 && dominated && r.snore.fitted_slope >= 1.0,
               "pnp_slope=" + io::fmt(r.pnp.fitted_slope) + " snore_slope=" + io::fmt(r.snore.fitted_slope));
    }
    if (want("unbiased")) {
        verify::Csv c{{"trial", "component", "estimate", "reference", "z"}, {}};
        SeedStream s(seed);
        double worst = 0.0;
        for (int t = 0; t < 5; ++t) {
            const double m1 = -2.0 + s.uniform(), m2 = 1.0 + s.uniform();
            const GmmPrior prior({GmmComponent{0.4, Vector::Constant(1, m1), Matrix::Constant(1, 1, 0.3 + s.uniform())},
                                  GmmComponent{0.6, Vector::Constant(1, m2), Matrix::Constant(1, 1, 0.3 + s.uniform())}});
            Vector x = Vector::Constant(1, -3.0 + 6.0 * s.uniform());
            const double sigma = 0.2 + 0.8 * s.uniform();
            const auto u = verify::unbiasedness_test(prior, x, sigma, 100000, seed * 31 + static_cast<std::uint64_t>(t));
            c.rows.push_back({static_cast<double>(t), 0.0, u.estimate[0], u.reference[0], u.z_score[0]});
            worst = std::max(worst, std::abs(u.z_score[0]));
        }
        verify::write_csv(job.out_dir, "unbiased", seed, c);
        report("unbiased", worst <= 3.0, "max_abs_z=" + io::fmt(worst));
    }
    if (want("critical")) {
        verify::ScalarProblem p{std::make_shared<const GmmPrior>(verify::bimodal_gmm()), 0.3, 0.5, 0.25};
        const auto sched = build_linear_schedule(1.0, 0.05, 0.25, 0.25, 10, 30000, 20000);
        const auto rep = verify::critical_point_test(p, sched, StepRule::decaying(0.2, 0.75), 20, seed);
        verify::Csv c{{"seed", "final", "distance"}, {}};
        for (std::size_t i = 0; i < rep.finals.size(); ++i)
            c.rows.push_back({static_cast<double>(seed + i), rep.finals[i], rep.distances[i]});
        verify::write_csv(job.out_dir, "critical", seed, c);
        report("critical", rep.within(0.05) >= 18, "within_0.05=" + std::to_string(rep.within(0.05)) + "/20");
    }
    if (want("drift")) {
        const auto prob = verify::make_quadratic_problem(4, seed, 0.5);
        const auto rep = verify::bias_drift_sweep(prob, {1e-3, 1e-2, 1e-1}, seed);
        verify::Csv c{{"bias", "plateau"}, {{0.0, rep.unbiased_plateau}}};
        for (std::size_t i = 0; i < rep.sweep.axis.size(); ++i) c.rows.push_back({rep.sweep.axis[i], rep.sweep.readings[i]});
        verify::write_csv(job.out_dir, "drift", seed, c);
        bool mono = rep.diverged.empty();
        for (std::size_t i = 1; i < rep.sweep.readings.size(); ++i) mono = mono && rep.sweep.readings[i] > rep.sweep.readings[i - 1];
        report("drift", mono && rep.sweep.tolerance_met && rep.sweep.fitted_slope >= 0.25 && rep.sweep.fitted_slope <= 0.75,
               "slope=" + io::fmt(rep.sweep.fitted_slope) + " r2=" + io::fmt(rep.sweep.r_squared));
    }
    if (want("noise")) {
        const double sigma = 10.0 / 255.0;
        const double est = verify::pure_noise_estimate(Shape{256, 256, 1}, sigma, seed);
        verify::Csv c{{"sigma", "sigma_hat"}, {{sigma, est}}};
        verify::write_csv(job.out_dir, "noise", seed, c);
        report("noise", std::abs(est - sigma) <= 0.1 * sigma, "sigma_hat=" + io::fmt(est));
    }
    if (want("landscape")) {
        const auto csv = verify::landscape_1d(verify::bundled_gmm3(), job.sigmas, -6.0, 6.0, 1201);
        verify::write_csv(job.out_dir, "landscape", seed, csv);
        report("landscape", true, "rows=" + std::to_string(csv.rows.size()));
    }
    return ok ? ExitCode::Ok : ExitCode::CheckFailed;
}

} // namespace detail

// Runs one job. Failures are reported on `err` and mapped to distinct exit codes.
inline ExitCode execute(const JobSpec& job, std::ostream& log = std::cout, std::ostream& err = std::cerr)
{
    const LogLevel level = log_level_from_env();
    try {
        std::filesystem::create_directories(job.out_dir);
        detail::write_manifest(job);
        if (job.command == "degrade") return detail::degrade(job, log, level);
        if (job.command == "restore") return detail::restore(job, log, level);
        if (job.command == "landscape") return detail::landscape(job, log, level);
        return detail::verify_suite(job, log, level);
    } catch (const IoError& e) {
        err << "io error: " << e.what() << "\n";
        return ExitCode::Io;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "io error: " << e.what() << "\n";
        return ExitCode::Io;
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << "\n";
        return ExitCode::Usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return ExitCode::Failure;
    }
}

} // namespace snore::cli
