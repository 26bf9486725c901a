#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "forward_models.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "priors.hpp"
#include "tensor.hpp"

namespace snore {

enum class Algorithm { Red, RedProx, Snore, SnoreAnnealed, SnoreProx, PnpSgd };

inline std::string to_string(Algorithm a)
{
    switch (a) {
    case Algorithm::Red: return "red";
    case Algorithm::RedProx: return "red-prox";
    case Algorithm::Snore: return "snore";
    case Algorithm::SnoreAnnealed: return "snore-annealed";
    case Algorithm::SnoreProx: return "snore-prox";
    case Algorithm::PnpSgd: return "pnp-sgd";
    }
    return "?";
}

inline Algorithm parse_algorithm(const std::string& s)
{
    for (auto a : {Algorithm::Red, Algorithm::RedProx, Algorithm::Snore, Algorithm::SnoreAnnealed, Algorithm::SnoreProx,
                   Algorithm::PnpSgd})
        if (to_string(a) == s) return a;
    throw ValueError("unknown algorithm '" + s + "'");
}

// Noise is injected into the denoiser input.
inline bool is_stochastic_denoising(Algorithm a)
{
    return a == Algorithm::Snore || a == Algorithm::SnoreAnnealed || a == Algorithm::SnoreProx;
}

inline bool uses_prox(Algorithm a) { return a == Algorithm::RedProx || a == Algorithm::SnoreProx; }

struct Level {
    double sigma;
    double alpha;
    std::size_t iterations;
};

class AnnealingSchedule {
public:
    explicit AnnealingSchedule(std::vector<Level> levels) : levels_(std::move(levels))
    {
        require(!levels_.empty(), "schedule: at least one level");
        for (std::size_t i = 0; i < levels_.size(); ++i) {
            const auto& l = levels_[i];
            const std::string tag = "schedule level " + std::to_string(i);
            require(l.sigma > 0.0 && std::isfinite(l.sigma), tag + ": sigma must be > 0");
            require(l.alpha > 0.0 && std::isfinite(l.alpha), tag + ": alpha must be > 0");
            require(l.iterations >= 1, tag + ": iterations must be >= 1");
            if (i > 0) require(l.sigma < levels_[i - 1].sigma, tag + ": sigma must strictly decrease");
        }
    }

    static AnnealingSchedule single(double sigma, double alpha, std::size_t iterations)
    {
        return AnnealingSchedule({Level{sigma, alpha, iterations}});
    }

    const std::vector<Level>& levels() const { return levels_; }
    std::size_t size() const { return levels_.size(); }

    std::size_t total_iterations() const
    {
        std::size_t n = 0;
        for (const auto& l : levels_) n += l.iterations;
        return n;
    }

private:
    std::vector<Level> levels_;
};

// m levels linearly interpolating sigma and alpha. The first (total - tail) iterations are split
// evenly (remainder to the earliest levels) and `tail` extra iterations go to the last level.
inline AnnealingSchedule build_linear_schedule(double sigma_first, double sigma_last, double alpha_first,
                                               double alpha_last, std::size_t m, std::size_t total_iters,
                                               std::size_t tail_iters)
{
    require(m >= 1, "schedule: need at least one level");
    require(sigma_last > 0.0, "schedule: final sigma must be > 0");
    if (m == 1) require(sigma_first == sigma_last, "schedule: a single level needs sigma_0 = sigma_last");
    else require(sigma_first > sigma_last, "schedule: sigma_0 must exceed sigma_last");
    require(tail_iters <= total_iters && total_iters - tail_iters >= m,
            "schedule: cannot split " + std::to_string(total_iters) + " iterations (" + std::to_string(tail_iters) +
                " tail) over " + std::to_string(m) + " levels");
    const std::size_t body = total_iters - tail_iters;
    std::vector<Level> levels;
    for (std::size_t i = 0; i < m; ++i) {
        const double t = m == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(m - 1);
        const double sigma = i + 1 == m ? sigma_last : sigma_first + t * (sigma_last - sigma_first);
        const double alpha = i + 1 == m ? alpha_last : alpha_first + t * (alpha_last - alpha_first);
        std::size_t n = body / m + (i < body % m ? 1 : 0);
        if (i + 1 == m) n += tail_iters;
        levels.push_back({sigma, alpha, n});
    }
    return AnnealingSchedule(std::move(levels));
}

struct StepRule {
    enum class Kind { Constant, Decaying };
    Kind kind = Kind::Constant;
    double delta = 0.1;
    double exponent = 1.0;

    static StepRule constant(double delta)
    {
        require(delta > 0.0 && std::isfinite(delta), "step: delta must be > 0");
        return {Kind::Constant, delta, 0.0};
    }
    // delta / k^a with a in (1/2, 1].
    static StepRule decaying(double delta, double exponent)
    {
        require(delta > 0.0 && std::isfinite(delta), "step: delta must be > 0");
        require(exponent > 0.5 && exponent <= 1.0, "step: decay exponent must lie in (1/2, 1]");
        return {Kind::Decaying, delta, exponent};
    }

    // Step for iteration k >= 1.
    double at(std::size_t k) const
    {
        return kind == Kind::Constant ? delta : delta / std::pow(static_cast<double>(k), exponent);
    }
};

// Start from y. For masks, unobserved pixels take `fill`; for decimation, y is upsampled by replication.
struct InitObservation {
    double fill = 0.5;
};
struct InitConstant {
    double value;
};
struct InitProvided {
    ImageGrid image;
};
// Uniform on [0,1), drawn from a stream split off the run seed.
struct InitRandom {};

using InitPolicy = std::variant<InitObservation, InitConstant, InitProvided, InitRandom>;

struct RunOptions {
    InitPolicy init = InitObservation{};
    std::uint64_t seed = 0;
    std::size_t log_every = 1;
    std::optional<ImageGrid> ground_truth;
};

struct RunConfig {
    Algorithm algorithm = Algorithm::SnoreAnnealed;
    AnnealingSchedule schedule = AnnealingSchedule::single(0.1, 1.0, 1);
    StepRule step = StepRule::constant(0.1);
    double sgd_noise = 0.0;
    RunOptions options;

    void validate() const
    {
        require(sgd_noise >= 0.0 && std::isfinite(sgd_noise), "beta must be >= 0");
        require(sgd_noise == 0.0 || algorithm == Algorithm::PnpSgd, "beta applies to pnp-sgd only");
        require(options.log_every >= 1, "log_every must be >= 1");
        const bool multi = algorithm == Algorithm::SnoreAnnealed || algorithm == Algorithm::SnoreProx;
        require(multi || schedule.size() == 1, to_string(algorithm) + " takes a single (sigma, alpha) level");
    }
};

struct TrajectoryRecord {
    std::size_t iter;
    std::size_t level;
    double sigma;
    double objective;
    double grad_norm;
    std::optional<double> psnr;
    std::optional<double> sigma_hat;
};

struct Trajectory {
    // How grad J was evaluated ("closed-form", "gauss-hermite-20", "monte-carlo-64", ...).
    std::string gradient_estimator;
    // What the J column holds.
    std::string objective;
    std::vector<TrajectoryRecord> records;

    void write_csv(std::ostream& out) const
    {
        out << "iter,level,J,grad_norm,psnr,sigma_hat\n";
        for (const auto& r : records) {
            out << r.iter << "," << r.level << "," << io::fmt(r.objective) << "," << io::fmt(r.grad_norm) << ","
                << (r.psnr ? io::fmt(*r.psnr) : "") << "," << (r.sigma_hat ? io::fmt(*r.sigma_hat) : "") << "\n";
        }
    }

    bool operator==(const Trajectory& o) const
    {
        if (records.size() != o.records.size() || gradient_estimator != o.gradient_estimator) return false;
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto &a = records[i], &b = o.records[i];
            if (a.iter != b.iter || a.level != b.level || a.objective != b.objective || a.grad_norm != b.grad_norm ||
                a.psnr != b.psnr || a.sigma_hat != b.sigma_hat)
                return false;
        }
        return true;
    }
};

struct RunResult {
    ImageGrid x;
    Trajectory trajectory;
    bool diverged = false;
    std::size_t iterations = 0;
};

namespace detail {

inline ImageGrid initial_iterate(const DegradationModel& model, const ImageGrid& y, const RunOptions& opt)
{
    const Shape shape = model.input_shape();
    if (auto* c = std::get_if<InitConstant>(&opt.init)) return ImageGrid(shape, c->value);
    if (auto* p = std::get_if<InitProvided>(&opt.init)) {
        if (p->image.shape() != shape) throw ShapeError("provided initialization has shape " + p->image.shape().str());
        return p->image;
    }
    if (std::holds_alternative<InitRandom>(opt.init)) {
        SeedStream s = SeedStream(opt.seed).split(2);
        ImageGrid x(shape);
        for (std::size_t k = 0; k < x.size(); ++k) x[k] = s.uniform();
        return x;
    }
    const double fill = std::get<InitObservation>(opt.init).fill;
    if (auto* m = std::get_if<Mask>(&model.kind())) {
        ImageGrid x = y;
        for (std::size_t k = 0; k < x.size(); ++k)
            if (m->mask[k] == 0.0) x[k] = fill;
        return x;
    }
    if (auto* d = std::get_if<DecimatedBlur>(&model.kind())) {
        ImageGrid x(shape);
        for (std::size_t i = 0; i < shape.height; ++i)
            for (std::size_t j = 0; j < shape.width; ++j)
                for (std::size_t c = 0; c < shape.channels; ++c) x(i, j, c) = y(i / d->factor, j / d->factor, c);
        return x;
    }
    return y;
}

class Engine {
public:
    Engine(const DegradationModel& model, const DenoiserHandle& denoiser, const ImageGrid& y, Algorithm algo,
           double beta, const StepRule& step, const RunOptions& opt)
        : model_(model), denoiser_(denoiser), y_(y), algo_(algo), beta_(beta), step_(step), opt_(opt),
          noise_(opt.seed), probe_(SeedStream(opt.seed).split(1))
    {
        if (y.shape() != model.observation_shape())
            throw ShapeError("observation " + y.shape().str() + " does not match model " +
                             model.observation_shape().str());
        if (uses_prox(algo) && !model.has_prox())
            throw UnsupportedError(to_string(algo) + " needs a proximal fidelity; " + model.name() + " has none");
        if (opt.ground_truth && opt.ground_truth->shape() != model.input_shape())
            throw ShapeError("ground truth shape does not match the unknown");
        require(opt.log_every >= 1, "log_every must be >= 1");
        require(beta >= 0.0, "beta must be >= 0");
        const auto* oracle = denoiser.oracle();
        const bool snore_like = is_stochastic_denoising(algo);
        result_.trajectory.gradient_estimator =
            oracle ? oracle->estimator : (snore_like ? "monte-carlo-64" : "denoiser-residual");
        result_.trajectory.objective = oracle ? (snore_like ? "F+alpha*R_sigma" : "F-alpha*log p_sigma") : "F";
    }

    RunResult run(const std::vector<Level>& levels)
    {
        ImageGrid x = initial_iterate(model_, y_, opt_);
        if (!all_finite(x)) throw ValueError("initial iterate is not finite");
        if (levels.empty()) throw ValueError("no levels to run");
        for (const auto& l : levels) {
            require(l.sigma > 0.0, "sigma must be > 0");
            require(l.alpha >= 0.0, "alpha must be >= 0");
        }
        const bool snore_like = is_stochastic_denoising(algo_);
        log(0, 0, levels[0], x, x);

        std::size_t k = 0;
        std::size_t total = 0;
        for (const auto& l : levels) total += l.iterations;
        ImageGrid noisy = x;
        for (std::size_t li = 0; li < levels.size(); ++li) {
            const Level& lv = levels[li];
            for (std::size_t n = 0; n < lv.iterations; ++n) {
                ++k;
                const double delta = step_.at(k);
                const double reg = lv.alpha * delta / (lv.sigma * lv.sigma);
                noisy = snore_like ? x + sample_gaussian(noise_, x.shape(), lv.sigma) : x;
                const ImageGrid denoised = denoiser_.apply(noisy, lv.sigma);

                ImageGrid next = x;
                next.axpy(-reg, x - denoised);
                if (uses_prox(algo_)) {
                    next = model_.fidelity_prox(next, y_, delta);
                } else {
                    next.axpy(-delta, model_.fidelity_grad(x, y_));
                    if (algo_ == Algorithm::PnpSgd && beta_ > 0.0)
                        next.axpy(beta_ * delta, sample_gaussian(noise_, x.shape(), 1.0));
                }

                if (!all_finite(next) || max_abs(next) > 1e6) {
                    result_.diverged = true;
                    log(k - 1, li, lv, x, noisy);
                    result_.x = std::move(x);
                    result_.iterations = k - 1;
                    return std::move(result_);
                }
                x = std::move(next);
                if (k % opt_.log_every == 0 || k == total) log(k, li, lv, x, noisy);
            }
        }
        result_.x = std::move(x);
        result_.iterations = k;
        return std::move(result_);
    }

private:
    void log(std::size_t k, std::size_t level, const Level& lv, const ImageGrid& x, const ImageGrid& noisy)
    {
        if (!result_.trajectory.records.empty() && result_.trajectory.records.back().iter == k) return;
        const auto* oracle = denoiser_.oracle();
        const bool snore_like = is_stochastic_denoising(algo_);
        double objective = model_.fidelity_value(x, y_);
        ImageGrid grad = model_.fidelity_grad(x, y_);
        const double s2 = lv.sigma * lv.sigma;
        if (snore_like) {
            if (oracle) {
                objective += lv.alpha * oracle->snore_value(x.values(), lv.sigma);
                const auto g = oracle->snore_grad(x.values(), lv.sigma);
                for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += lv.alpha * g[i];
            } else {
                // (1/sigma^2)(x - mean_j D(x + sigma e_j)), 64 draws from a side stream
                constexpr int draws = 64;
                ImageGrid mean(x.shape());
                for (int j = 0; j < draws; ++j) mean += denoiser_.apply(x + sample_gaussian(probe_, x.shape(), lv.sigma), lv.sigma);
                mean *= 1.0 / draws;
                grad.axpy(lv.alpha / s2, x - mean);
            }
        } else {
            if (oracle) objective += lv.alpha * oracle->pnp_value(x.values(), lv.sigma);
            grad.axpy(lv.alpha / s2, x - denoiser_.apply(x, lv.sigma));
        }
        TrajectoryRecord r{k, level, lv.sigma, objective, norm(grad), std::nullopt, std::nullopt};
        if (opt_.ground_truth) r.psnr = psnr(x, *opt_.ground_truth);
        if (x.height() >= 2 && x.width() >= 2) r.sigma_hat = estimate_noise(noisy);
        result_.trajectory.records.push_back(r);
    }

    const DegradationModel& model_;
    const DenoiserHandle& denoiser_;
    const ImageGrid& y_;
    Algorithm algo_;
    double beta_;
    StepRule step_;
    const RunOptions& opt_;
    SeedStream noise_;
    SeedStream probe_;
    RunResult result_;
};

inline RunResult run_levels(const DegradationModel& model, const DenoiserHandle& denoiser, const ImageGrid& y,
                            Algorithm algo, double beta, const StepRule& step, const std::vector<Level>& levels,
                            const RunOptions& opt)
{
    return Engine(model, denoiser, y, algo, beta, step, opt).run(levels);
}

inline void check_level(double sigma, double alpha)
{
    require(sigma > 0.0 && std::isfinite(sigma), "sigma must be > 0");
    require(alpha >= 0.0 && std::isfinite(alpha), "alpha must be >= 0");
}

} // namespace detail

// x <- x - delta grad F - (alpha delta / sigma^2)(x - D(x))
inline RunResult run_red(const DegradationModel& model, const DenoiserHandle& denoiser, const ImageGrid& y,
                         double sigma, double alpha, const StepRule& step, std::size_t n_iters,
                         const RunOptions& opt = {})
{
    detail::check_level(sigma, alpha);
    return detail::run_levels(model, denoiser, y, Algorithm::Red, 0.0, step, {{sigma, alpha, n_iters}}, opt);
}

// z = x - (alpha delta / sigma^2)(x - D(x)); x <- prox_{delta F}(z)
inline RunResult run_red_prox(const DegradationModel& model, const DenoiserHandle& denoiser, const ImageGrid& y,
                              double sigma, double alpha, const StepRule& step, std::size_t n_iters,
                              const RunOptions& opt = {})
{
    detail::check_level(sigma, alpha);
    return detail::run_levels(model, denoiser, y, Algorithm::RedProx, 0.0, step, {{sigma, alpha, n_iters}}, opt);
}

// x <- x - delta_k grad F - (alpha delta_k / sigma^2)(x - D(x + sigma e)), e ~ N(0, I)
inline RunResult run_snore(const DegradationModel& model, const DenoiserHandle& denoiser, const ImageGrid& y,
                           double sigma, double alpha, const StepRule& step, std::size_t n_iters,
                           const RunOptions& opt = {})
{
    detail::check_level(sigma, alpha);
    return detail::run_levels(model, denoiser, y, Algorithm::Snore, 0.0, step, {{sigma, alpha, n_iters}}, opt);
}

// The SNORE loop over each level in turn; the iterate carries across levels.
inline RunResult run_snore_annealed(const DegradationModel& model, const DenoiserHandle& denoiser, const ImageGrid& y,
                                    const AnnealingSchedule& schedule, const StepRule& step, const RunOptions& opt = {})
{
    return detail::run_levels(model, denoiser, y, Algorithm::SnoreAnnealed, 0.0, step, schedule.levels(), opt);
}

// Noisy denoiser step to z, then x <- prox_{delta F}(z); annealed over the schedule.
inline RunResult run_snore_prox(const DegradationModel& model, const DenoiserHandle& denoiser, const ImageGrid& y,
                                const AnnealingSchedule& schedule, const StepRule& step, const RunOptions& opt = {})
{
    return detail::run_levels(model, denoiser, y, Algorithm::SnoreProx, 0.0, step, schedule.levels(), opt);
}

inline RunResult run_snore_prox(const DegradationModel& model, const DenoiserHandle& denoiser, const ImageGrid& y,
                                double sigma, double alpha, const StepRule& step, std::size_t n_iters,
                                const RunOptions& opt = {})
{
    detail::check_level(sigma, alpha);
    return detail::run_levels(model, denoiser, y, Algorithm::SnoreProx, 0.0, step, {{sigma, alpha, n_iters}}, opt);
}

// RED step plus beta * delta * z, z ~ N(0, I), on the whole iterate.
inline RunResult run_pnp_sgd(const DegradationModel& model, const DenoiserHandle& denoiser, const ImageGrid& y,
                             double sigma, double alpha, double beta, const StepRule& step, std::size_t n_iters,
                             const RunOptions& opt = {})
{
    detail::check_level(sigma, alpha);
    return detail::run_levels(model, denoiser, y, Algorithm::PnpSgd, beta, step, {{sigma, alpha, n_iters}}, opt);
}

inline RunResult run(const DegradationModel& model, const DenoiserHandle& denoiser, const ImageGrid& y,
                     const RunConfig& cfg)
{
    cfg.validate();
    return detail::run_levels(model, denoiser, y, cfg.algorithm, cfg.sgd_noise, cfg.step, cfg.schedule.levels(),
                              cfg.options);
}

} // namespace snore
