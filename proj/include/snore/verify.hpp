#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "errors.hpp"
#include "forward_models.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "priors.hpp"
#include "solvers.hpp"
#include "tensor.hpp"

namespace snore::verify {

struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

// Least squares of log(readings) against log(axis).
inline LogLogFit fit_loglog(const std::vector<double>& axis, const std::vector<double>& readings)
{
    require(axis.size() == readings.size() && axis.size() >= 2, "fit: need at least two matching points");
    const double n = static_cast<double>(axis.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < axis.size(); ++i) {
        require(axis[i] > 0.0 && readings[i] > 0.0 && std::isfinite(readings[i]), "fit: log fit needs positive values");
        lx.push_back(std::log(axis[i]));
        ly.push_back(std::log(readings[i]));
        sx += lx.back(), sy += ly.back(), sxx += lx.back() * lx.back(), sxy += lx.back() * ly.back();
    }
    LogLogFit f;
    f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    f.intercept = (sy - f.slope * sx) / n;
    const double mean = sy / n;
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double r = ly[i] - (f.intercept + f.slope * lx[i]);
        ss_res += r * r;
        ss_tot += (ly[i] - mean) * (ly[i] - mean);
    }
    f.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return f;
}

struct SweepResult {
    std::vector<double> axis;
    std::vector<double> readings;
    double fitted_slope = 0.0;
    double r_squared = 0.0;
    // false when the fit is unreliable (R^2 < 0.9) or the sup is not grid-converged
    bool tolerance_met = false;
    bool resolution_stable = true;
};

inline void finish_fit(SweepResult& r)
{
    const auto f = fit_loglog(r.axis, r.readings);
    r.fitted_slope = f.slope;
    r.r_squared = f.r_squared;
    r.tolerance_met = f.r_squared >= 0.9 && r.resolution_stable;
}

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

// Writes `<dir>/<test>_<seed>.csv` and returns its path.
inline std::filesystem::path write_csv(const std::filesystem::path& dir, const std::string& test, std::uint64_t seed,
                                       const Csv& csv)
{
    std::filesystem::create_directories(dir);
    const auto path = dir / (test + "_" + std::to_string(seed) + ".csv");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    for (std::size_t i = 0; i < csv.header.size(); ++i) out << (i ? "," : "") << csv.header[i];
    out << "\n";
    for (const auto& row : csv.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << io::fmt(row[i]);
        out << "\n";
    }
    return path;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n)
{
    require(n >= 2 && hi > lo, "linspace: need n >= 2 and hi > lo");
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

// Three separated components used by the rate sweep and the landscape command.
inline GmmPrior bundled_gmm3()
{
    auto comp = [](double w, double m, double var) { return GmmComponent{w, Vector::Constant(1, m), Matrix::Constant(1, 1, var)}; };
    return GmmPrior({comp(0.3, -4.0, 1.0), comp(0.4, 0.0, 1.44), comp(0.3, 3.0, 0.81)});
}

// Symmetric bimodal prior with modes at +-2.
inline GmmPrior bimodal_gmm()
{
    auto comp = [](double m) { return GmmComponent{0.5, Vector::Constant(1, m), Matrix::Constant(1, 1, 0.49)}; };
    return GmmPrior({comp(-2.0), comp(2.0)});
}

// ---------------------------------------------------------------------------
// Convergence rates of the smoothed score and of -grad R_sigma towards the score.

struct RateSweep {
    SweepResult pnp;
    SweepResult snore;
};

inline RateSweep rate_sweep(const GmmPrior& prior, double lo, double hi, const std::vector<double>& sigmas,
                            std::size_t grid = 2001, const QuadratureSpec& quad = QuadratureSpec::gauss_hermite(20))
{
    require(prior.dimension() == 1, "rate_sweep: 1D prior required");
    require(sigmas.size() >= 5, "rate_sweep: at least 5 noise levels");
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        require(sigmas[i] > 0.0 && sigmas[i] <= 1.0, "rate_sweep: sigmas must lie in (0, 1]");
        if (i) require(sigmas[i] < sigmas[i - 1], "rate_sweep: sigmas must decrease");
    }
    require(sigmas.front() / sigmas.back() >= 3.0, "rate_sweep: sigmas must span a reasonable range");

    auto sup_errors = [&](double sigma, std::size_t n) {
        double pnp = 0.0, snore = 0.0;
        Vector x(1);
        for (double t : linspace(lo, hi, n)) {
            x[0] = t;
            const double s = score(prior, x)[0];
            pnp = std::max(pnp, std::abs(smoothed_score(prior, x, sigma)[0] - s));
            snore = std::max(snore, std::abs(-snore_grad(prior, x, sigma, quad)[0] - s));
        }
        return std::pair{pnp, snore};
    };

    std::vector<std::future<std::pair<std::pair<double, double>, std::pair<double, double>>>> jobs;
    for (double sigma : sigmas)
        jobs.push_back(std::async(std::launch::async, [&, sigma] {
            return std::pair{sup_errors(sigma, grid), sup_errors(sigma, 2 * grid - 1)};
        }));

    RateSweep out;
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        const auto [coarse, fine] = jobs[i].get();
        out.pnp.axis.push_back(sigmas[i]);
        out.snore.axis.push_back(sigmas[i]);
        out.pnp.readings.push_back(coarse.first);
        out.snore.readings.push_back(coarse.second);
        auto stable = [](double a, double b) { return std::abs(b - a) <= 0.01 * std::max(std::abs(a), 1e-300); };
        out.pnp.resolution_stable = out.pnp.resolution_stable && stable(coarse.first, fine.first);
        out.snore.resolution_stable = out.snore.resolution_stable && stable(coarse.second, fine.second);
    }
    finish_fit(out.pnp);
    finish_fit(out.snore);
    return out;
}

inline Csv rate_csv(const RateSweep& r)
{
    Csv c{{"sigma", "pnp_error", "snore_error"}, {}};
    for (std::size_t i = 0; i < r.pnp.axis.size(); ++i) c.rows.push_back({r.pnp.axis[i], r.pnp.readings[i], r.snore.readings[i]});
    return c;
}

// ---------------------------------------------------------------------------
// Mean of the one-sample gradient (1/sigma^2)(x - D(x + sigma e)) against the quadrature value.

struct UnbiasednessReport {
    Vector estimate;
    Vector reference;
    Vector standard_error;
    Vector z_score;
};

inline UnbiasednessReport unbiasedness_test(const GmmPrior& prior, const VectorRef& x, double sigma,
                                            std::size_t n_samples, std::uint64_t seed)
{
    require(n_samples >= 10000, "unbiasedness_test: at least 1e4 samples");
    require(sigma > 0.0, "unbiasedness_test: sigma must be > 0");
    const auto d = static_cast<Eigen::Index>(prior.dimension());
    SeedStream stream(seed);
    Vector sum = Vector::Zero(d), sum_sq = Vector::Zero(d), noisy(d);
    const double inv_s2 = 1.0 / (sigma * sigma);
    for (std::size_t s = 0; s < n_samples; ++s) {
        for (Eigen::Index j = 0; j < d; ++j) noisy[j] = x[j] + sigma * stream.normal();
        const Vector g = inv_s2 * (x - mmse_denoise(prior, noisy, sigma));
        sum += g;
        sum_sq += g.cwiseProduct(g);
    }
    const double n = static_cast<double>(n_samples);
    UnbiasednessReport r;
    r.estimate = sum / n;
    const Vector var = ((sum_sq / n - r.estimate.cwiseProduct(r.estimate)) * (n / (n - 1.0))).cwiseMax(0.0);
    r.standard_error = (var / n).cwiseSqrt();
    r.reference = snore_grad(prior, x, sigma, QuadratureSpec::gauss_hermite(60));
    r.z_score.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        const double diff = r.estimate[j] - r.reference[j];
        r.z_score[j] = r.standard_error[j] > 0.0 ? diff / r.standard_error[j]
                                                 : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    }
    return r;
}

// ---------------------------------------------------------------------------
// 1D problems: F(x) = (x - y)^2 / (2 sigma_y^2), prior a 1D GMM.

struct ScalarProblem {
    std::shared_ptr<const GmmPrior> prior;
    double observation;
    double sigma_y;
    double alpha;
    double lo = -6.0;
    double hi = 6.0;

    DegradationModel model() const
    {
        return DegradationModel::circular_blur(ImageGrid(1, 1, 1, 1.0), sigma_y, Shape{1, 1, 1});
    }

    // d/dx [F - alpha log p]
    double ideal_gradient(double x) const
    {
        Vector v(1);
        v[0] = x;
        return (x - observation) / (sigma_y * sigma_y) - alpha * score(*prior, v)[0];
    }
};

// Zeros of the ideal gradient by sign changes on a `step` grid, refined by bisection.
inline std::vector<double> critical_points(const ScalarProblem& p, double step = 1e-4)
{
    require(p.prior->dimension() == 1, "critical_points: 1D prior required");
    std::vector<double> roots;
    const auto n = static_cast<std::size_t>(std::llround((p.hi - p.lo) / step));
    double a = p.lo, ga = p.ideal_gradient(a);
    for (std::size_t i = 1; i <= n; ++i) {
        const double b = p.lo + static_cast<double>(i) * step;
        const double gb = p.ideal_gradient(b);
        if (ga == 0.0) roots.push_back(a);
        else if ((ga < 0.0) != (gb < 0.0) && gb != 0.0) {
            double l = a, r = b, gl = ga;
            for (int it = 0; it < 200 && r - l > 1e-14; ++it) {
                const double m = 0.5 * (l + r), gm = p.ideal_gradient(m);
                if ((gm < 0.0) == (gl < 0.0)) l = m, gl = gm;
                else r = m;
            }
            roots.push_back(0.5 * (l + r));
        }
        a = b, ga = gb;
    }
    if (ga == 0.0) roots.push_back(a);
    return roots;
}

struct CriticalPointReport {
    std::vector<double> critical_points;
    std::vector<double> finals;
    std::vector<double> distances;

    std::size_t within(double tol) const
    {
        return static_cast<std::size_t>(std::count_if(distances.begin(), distances.end(), [tol](double d) { return d <= tol; }));
    }
};

// Annealed SNORE from x0 = y for seeds first_seed .. first_seed + seed_count - 1.
inline CriticalPointReport critical_point_test(const ScalarProblem& p, const AnnealingSchedule& schedule,
                                               const StepRule& step, std::size_t seed_count, std::uint64_t first_seed = 0)
{
    CriticalPointReport rep;
    rep.critical_points = critical_points(p);
    if (rep.critical_points.empty()) throw ValueError("critical_point_test: no critical point in the compact");
    const auto model = p.model();
    const auto denoiser = exact_denoiser(p.prior);
    const ImageGrid y(1, 1, 1, p.observation);
    std::vector<std::future<double>> jobs;
    for (std::size_t s = 0; s < seed_count; ++s)
        jobs.push_back(std::async(std::launch::async, [&, s] {
            RunOptions opt;
            opt.seed = first_seed + s;
            opt.log_every = schedule.total_iterations();
            return run_snore_annealed(model, denoiser, y, schedule, step, opt).x[0];
        }));
    for (auto& j : jobs) {
        const double x = j.get();
        double best = std::numeric_limits<double>::infinity();
        for (double c : rep.critical_points) best = std::min(best, std::abs(x - c));
        rep.finals.push_back(x);
        rep.distances.push_back(best);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Gaussian-prior deblurring problems with a dense closed-form oracle.

// Dense circular convolution matrix built from the kernel taps directly (no FFT).
inline Matrix dense_blur_matrix(const ImageGrid& kernel, std::size_t H, std::size_t W)
{
    const auto n = static_cast<Eigen::Index>(H * W);
    Matrix A = Matrix::Zero(n, n);
    const long ci = static_cast<long>(kernel.height() / 2), cj = static_cast<long>(kernel.width() / 2);
    const long h = static_cast<long>(H), w = static_cast<long>(W);
    for (long i = 0; i < h; ++i)
        for (long j = 0; j < w; ++j)
            for (long a = 0; a < static_cast<long>(kernel.height()); ++a)
                for (long b = 0; b < static_cast<long>(kernel.width()); ++b) {
                    // (A x)[i,j] = sum_{a,b} k[a,b] x[i - (a - ci), j - (b - cj)]
                    const long si = ((i - (a - ci)) % h + h) % h;
                    const long sj = ((j - (b - cj)) % w + w) % w;
                    A(i * w + j, si * w + sj) += kernel(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
                }
    return A;
}

struct QuadraticProblem {
    DegradationModel model;
    std::shared_ptr<const GmmPrior> prior;
    ImageGrid truth;
    ImageGrid y;
    Matrix blur;

    Shape shape() const { return model.input_shape(); }
    double sigma_y() const { return model.sigma_y(); }

    // Solves [A^T A / sy^2 + alpha P] x = A^T y / sy^2 + alpha P m, P = (C + sigma^2 I)^{-1}.
    Vector stationary_point(double sigma, double alpha) const
    {
        const double iy = 1.0 / (sigma_y() * sigma_y());
        const Matrix P = prior->inflated_precision(0, sigma * sigma);
        const Vector yv = Eigen::Map<const Vector>(y.values().data(), static_cast<Eigen::Index>(y.size()));
        const Matrix lhs = iy * blur.transpose() * blur + alpha * P;
        const Vector rhs = iy * blur.transpose() * yv + alpha * P * prior->component(0).mean;
        return lhs.ldlt().solve(rhs);
    }

    // grad of F + alpha R_sigma in closed form.
    Vector objective_gradient(const VectorRef& x, double sigma, double alpha) const
    {
        const double iy = 1.0 / (sigma_y() * sigma_y());
        const Vector yv = Eigen::Map<const Vector>(y.values().data(), static_cast<Eigen::Index>(y.size()));
        return iy * blur.transpose() * (blur * x - yv) +
               alpha * prior->inflated_precision(0, sigma * sigma) * (x - prior->component(0).mean);
    }
};

// side x side image, 3x3 cross kernel, prior N(m, 0.03 I + 0.01 B B^T), m ~ U(0.3, 0.7).
inline QuadraticProblem make_quadratic_problem(std::size_t side, std::uint64_t seed, double sigma_y)
{
    const std::size_t d = side * side;
    SeedStream s(seed);
    const auto n = static_cast<Eigen::Index>(d);
    Matrix B(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) B(i, j) = s.normal() / std::sqrt(static_cast<double>(d));
    Matrix C = 0.03 * Matrix::Identity(n, n) + 0.01 * B * B.transpose();
    C = 0.5 * (C + C.transpose());
    Vector mean(n);
    for (Eigen::Index i = 0; i < n; ++i) mean[i] = 0.3 + 0.4 * s.uniform();
    ImageGrid truth(side, side, 1);
    for (std::size_t i = 0; i < d; ++i) truth[i] = s.uniform();

    ImageGrid kernel(3, 3, 1);
    kernel(0, 1) = kernel(1, 0) = kernel(1, 2) = kernel(2, 1) = 0.1;
    kernel(1, 1) = 0.6;
    auto model = DegradationModel::circular_blur(kernel, sigma_y, truth.shape());
    ImageGrid y = model.degrade(truth, s);
    auto prior = std::make_shared<const GmmPrior>(GmmPrior::gaussian(mean, C));
    return QuadraticProblem{std::move(model), std::move(prior), std::move(truth), std::move(y),
                            dense_blur_matrix(kernel, side, side)};
}

inline double max_over_tail(const Trajectory& t, double fraction, std::size_t total_iters)
{
    const double start = static_cast<double>(total_iters) * (1.0 - fraction);
    double m = 0.0;
    for (const auto& r : t.records)
        if (static_cast<double>(r.iter) > start) m = std::max(m, r.grad_norm);
    return m;
}

// ---------------------------------------------------------------------------
// SNORE with a constant bias M u added to the exact denoiser (|u| = 1).

struct BiasDriftReport {
    SweepResult sweep;
    double unbiased_plateau = 0.0;
    std::vector<double> diverged;
};

struct DriftSettings {
    double sigma = 0.5;
    double alpha = 0.3;
    StepRule step = StepRule::decaying(0.2, 0.75);
    std::size_t iterations = 10000;
};

inline BiasDriftReport bias_drift_sweep(const QuadraticProblem& p, const std::vector<double>& biases, std::uint64_t seed,
                                        const DriftSettings& cfg = {})
{
    require(p.prior->size() == 1, "bias_drift_sweep: exact closed-form prior required");
    for (std::size_t i = 1; i < biases.size(); ++i) require(biases[i] > biases[i - 1], "bias_drift_sweep: biases must increase");
    const std::size_t d = p.shape().size();
    SeedStream dir_stream = SeedStream(seed).split(3);
    std::vector<double> direction(d);
    double len = 0.0;
    for (double& v : direction) v = dir_stream.normal(), len += v * v;
    for (double& v : direction) v /= std::sqrt(len);

    const auto base = exact_denoiser(p.prior);
    auto plateau = [&](double M, bool& diverged) {
        const auto offset = [direction, M](double) {
            std::vector<double> c(direction);
            for (double& v : c) v *= M;
            return c;
        };
        const auto denoiser = M == 0.0 ? base : perturbed_denoiser(base, offset);
        RunOptions opt;
        opt.seed = seed;
        opt.log_every = 1;
        const auto r = run_snore(p.model, denoiser, p.y, cfg.sigma, cfg.alpha, cfg.step, cfg.iterations, opt);
        diverged = r.diverged;
        return max_over_tail(r.trajectory, 0.1, cfg.iterations);
    };

    BiasDriftReport rep;
    std::vector<double> all = biases;
    all.insert(all.begin(), 0.0);
    std::vector<std::future<std::pair<double, bool>>> jobs;
    for (double M : all)
        jobs.push_back(std::async(std::launch::async, [&, M] {
            bool div = false;
            const double v = plateau(M, div);
            return std::pair{v, div};
        }));
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto [v, div] = jobs[i].get();
        if (i == 0) {
            rep.unbiased_plateau = v;
            continue;
        }
        if (div) {
            rep.diverged.push_back(all[i]);
            continue;
        }
        rep.sweep.axis.push_back(all[i]);
        rep.sweep.readings.push_back(v);
    }
    if (rep.sweep.axis.size() >= 2) finish_fit(rep.sweep);
    return rep;
}

// ---------------------------------------------------------------------------
// -log p, -log p_sigma and R_sigma on a 1D grid.

inline Csv landscape_1d(const GmmPrior& prior, const std::vector<double>& sigmas, double lo, double hi, std::size_t points,
                        const QuadratureSpec& quad = QuadratureSpec::gauss_hermite(40))
{
    require(prior.dimension() == 1, "landscape_1d: 1D prior required");
    require(!sigmas.empty(), "landscape_1d: at least one sigma");
    Csv c;
    c.header = {"x", "neglogp"};
    for (double s : sigmas) {
        require(s > 0.0, "landscape_1d: sigmas must be > 0");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", s);
        c.header.push_back(std::string("neglogp_sigma_") + buf);
        c.header.push_back(std::string("R_sigma_") + buf);
    }
    Vector x(1);
    for (double t : linspace(lo, hi, points)) {
        x[0] = t;
        std::vector<double> row{t, -log_prior(prior, x)};
        for (double s : sigmas) {
            row.push_back(-log_smoothed(prior, x, s));
            row.push_back(snore_value(prior, x, s, quad));
        }
        c.rows.push_back(std::move(row));
    }
    return c;
}

// ---------------------------------------------------------------------------
// Pixelwise spread of the restoration across seeds.

struct VariabilityReport {
    ImageGrid std_field;
    double max_std = 0.0;
};

inline VariabilityReport seed_variability(const DegradationModel& model, const DenoiserHandle& denoiser,
                                          const ImageGrid& y, RunConfig config, const std::vector<std::uint64_t>& seeds)
{
    require(seeds.size() >= 2, "seed_variability: at least two seeds");
    require(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == seeds.size(),
            "seed_variability: seeds must be distinct");
    std::vector<std::future<RunResult>> jobs;
    for (auto s : seeds) {
        RunConfig c = config;
        c.options.seed = s;
        jobs.push_back(std::async(std::launch::async, [&, c] { return run(model, denoiser, y, c); }));
    }
    std::vector<ImageGrid> outs;
    for (auto& j : jobs) {
        auto r = j.get();
        if (r.diverged) throw std::runtime_error("seed_variability: a run diverged");
        outs.push_back(std::move(r.x));
    }
    VariabilityReport rep{ImageGrid(outs.front().shape()), 0.0};
    const double n = static_cast<double>(outs.size());
    for (std::size_t k = 0; k < rep.std_field.size(); ++k) {
        double m = 0.0, q = 0.0;
        for (const auto& o : outs) m += o[k];
        m /= n;
        for (const auto& o : outs) q += (o[k] - m) * (o[k] - m);
        rep.std_field[k] = std::sqrt(q / (n - 1.0));
        rep.max_std = std::max(rep.max_std, rep.std_field[k]);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Residual noise: sigma_hat of the denoiser input against the current sigma.

struct NoiseTrackRow {
    std::size_t iter;
    std::size_t level;
    double sigma;
    double sigma_hat;
    double gap;
};

inline std::vector<NoiseTrackRow> residual_noise_track(const DegradationModel& model, const DenoiserHandle& denoiser,
                                                       const ImageGrid& y, const RunConfig& config)
{
    const auto r = run(model, denoiser, y, config);
    std::vector<NoiseTrackRow> rows;
    for (const auto& rec : r.trajectory.records) {
        if (!rec.sigma_hat || rec.iter == 0) continue;
        rows.push_back({rec.iter, rec.level, rec.sigma, *rec.sigma_hat, *rec.sigma_hat - rec.sigma});
    }
    return rows;
}

inline Csv noise_track_csv(const std::vector<NoiseTrackRow>& rows)
{
    Csv c{{"iter", "level", "sigma", "sigma_hat", "gap"}, {}};
    for (const auto& r : rows)
        c.rows.push_back({static_cast<double>(r.iter), static_cast<double>(r.level), r.sigma, r.sigma_hat, r.gap});
    return c;
}

// Estimator calibration: sigma_hat of pure N(0, sigma^2) noise.
inline double pure_noise_estimate(Shape shape, double sigma, std::uint64_t seed)
{
    SeedStream s(seed);
    return estimate_noise(sample_gaussian(s, shape, sigma));
}

// Median of |gap| over the records of one level (or the last level when level == npos).
inline double median_abs_gap(const std::vector<NoiseTrackRow>& rows, std::size_t level)
{
    std::vector<double> g;
    for (const auto& r : rows)
        if (r.level == level) g.push_back(std::abs(r.gap));
    require(!g.empty(), "median_abs_gap: no rows for level");
    std::sort(g.begin(), g.end());
    const std::size_t m = g.size() / 2;
    return g.size() % 2 ? g[m] : 0.5 * (g[m - 1] + g[m]);
}

} // namespace snore::verify
