#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "io.hpp"
#include "tensor.hpp"

namespace snore {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

struct GmmComponent {
    double weight;
    Vector mean;
    Matrix covariance;
};

// Gaussian mixture p(x) = sum_i w_i N(x; m_i, C_i). All queries take the smoothing
// variance s2 = sigma^2 so that p_sigma (each C_i inflated by sigma^2 I) costs no refactorization.
class GmmPrior {
public:
    explicit GmmPrior(std::vector<GmmComponent> components) : components_(std::move(components))
    {
        require(!components_.empty(), "GMM: at least one component required");
        dim_ = static_cast<std::size_t>(components_.front().mean.size());
        require(dim_ >= 1, "GMM: dimension must be >= 1");
        double total = 0.0;
        for (std::size_t i = 0; i < components_.size(); ++i) {
            const auto& c = components_[i];
            const std::string tag = "GMM component " + std::to_string(i);
            require(c.weight > 0.0 && std::isfinite(c.weight), tag + ": weight must be > 0");
            require(static_cast<std::size_t>(c.mean.size()) == dim_, tag + ": mean dimension mismatch");
            require(c.mean.allFinite() && c.covariance.allFinite(), tag + ": non-finite parameters");
            require(static_cast<std::size_t>(c.covariance.rows()) == dim_ &&
                        static_cast<std::size_t>(c.covariance.cols()) == dim_,
                    tag + ": covariance must be d x d");
            const double scale = c.covariance.cwiseAbs().maxCoeff();
            require((c.covariance - c.covariance.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(scale, 1.0),
                    tag + ": covariance not symmetric");
            Eigen::LLT<Matrix> llt(c.covariance);
            require(llt.info() == Eigen::Success, tag + ": covariance not positive definite");
            Eigen::SelfAdjointEigenSolver<Matrix> eig(c.covariance);
            require(eig.eigenvalues().minCoeff() > 0.0, tag + ": covariance not positive definite");
            basis_.push_back(eig.eigenvectors());
            spectrum_.push_back(eig.eigenvalues());
            total += c.weight;
        }
        require(std::abs(total - 1.0) <= 1e-12, "GMM: weights must sum to 1");
    }

    static GmmPrior gaussian(Vector mean, Matrix covariance)
    {
        return GmmPrior({GmmComponent{1.0, std::move(mean), std::move(covariance)}});
    }

    std::size_t dimension() const { return dim_; }
    std::size_t size() const { return components_.size(); }
    const std::vector<GmmComponent>& components() const { return components_; }
    const GmmComponent& component(std::size_t i) const { return components_[i]; }

    // log p_sigma(x) with s2 = sigma^2 (s2 = 0 gives the prior itself).
    double log_density(const VectorRef& x, double s2) const
    {
        std::vector<double> lw(size());
        for (std::size_t i = 0; i < size(); ++i) lw[i] = log_joint(i, x, s2, nullptr);
        return log_sum_exp(lw);
    }

    // grad log p_sigma(x) = -sum_i r_i(x) (C_i + s2 I)^{-1} (x - m_i).
    Vector score(const VectorRef& x, double s2) const
    {
        check_dim(x);
        std::vector<double> lw(size());
        std::vector<Vector> pulls(size());
        for (std::size_t i = 0; i < size(); ++i) lw[i] = log_joint(i, x, s2, &pulls[i]);
        const double lse = log_sum_exp(lw);
        Vector g = Vector::Zero(static_cast<Eigen::Index>(dim_));
        for (std::size_t i = 0; i < size(); ++i) g -= std::exp(lw[i] - lse) * pulls[i];
        return g;
    }

    // Posterior component responsibilities of p_sigma at x.
    Vector responsibilities(const VectorRef& x, double s2) const
    {
        check_dim(x);
        std::vector<double> lw(size());
        for (std::size_t i = 0; i < size(); ++i) lw[i] = log_joint(i, x, s2, nullptr);
        const double lse = log_sum_exp(lw);
        Vector r(static_cast<Eigen::Index>(size()));
        for (std::size_t i = 0; i < size(); ++i) r[static_cast<Eigen::Index>(i)] = std::exp(lw[i] - lse);
        return r;
    }

    // Inverse covariance (C_i + s2 I)^{-1} and log det(C_i + s2 I) of one component.
    Matrix inflated_precision(std::size_t i, double s2) const
    {
        const Vector inv = (spectrum_[i].array() + s2).inverse();
        return basis_[i] * inv.asDiagonal() * basis_[i].transpose();
    }
    double inflated_log_det(std::size_t i, double s2) const { return (spectrum_[i].array() + s2).log().sum(); }

private:
    void check_dim(const VectorRef& x) const
    {
        if (static_cast<std::size_t>(x.size()) != dim_)
            throw ShapeError("GMM: expected dimension " + std::to_string(dim_) + ", got " + std::to_string(x.size()));
    }

    // log w_i + log N(x; m_i, C_i + s2 I); optionally returns (C_i + s2 I)^{-1}(x - m_i).
    double log_joint(std::size_t i, const VectorRef& x, double s2, Vector* pull) const
    {
        check_dim(x);
        const auto& c = components_[i];
        const Vector z = basis_[i].transpose() * (x - c.mean);
        const Vector var = spectrum_[i].array() + s2;
        const Vector scaled = z.cwiseQuotient(var);
        if (pull) *pull = basis_[i] * scaled;
        const double maha = z.dot(scaled);
        const double log_det = var.array().log().sum();
        return std::log(c.weight) - 0.5 * (static_cast<double>(dim_) * std::log(2.0 * std::numbers::pi) + log_det + maha);
    }

    static double log_sum_exp(const std::vector<double>& v)
    {
        double m = -std::numeric_limits<double>::infinity();
        for (double a : v) m = std::max(m, a);
        if (!std::isfinite(m)) return m;
        double s = 0.0;
        for (double a : v) s += std::exp(a - m);
        return m + std::log(s);
    }

    std::vector<GmmComponent> components_;
    std::vector<Matrix> basis_;
    std::vector<Vector> spectrum_;
    std::size_t dim_ = 0;
};

inline double log_prior(const GmmPrior& p, const VectorRef& x) { return p.log_density(x, 0.0); }

inline double log_smoothed(const GmmPrior& p, const VectorRef& x, double sigma)
{
    require(sigma >= 0.0, "log_smoothed: sigma must be >= 0");
    return p.log_density(x, sigma * sigma);
}

// grad log p (ascent direction).
inline Vector score(const GmmPrior& p, const VectorRef& x) { return p.score(x, 0.0); }

// grad log p_sigma (ascent direction).
inline Vector smoothed_score(const GmmPrior& p, const VectorRef& x, double sigma)
{
    require(sigma > 0.0, "smoothed_score: sigma must be > 0");
    return p.score(x, sigma * sigma);
}

// Posterior mean E[x | x + sigma n = noisy] through Tweedie's identity.
inline Vector mmse_denoise(const GmmPrior& p, const VectorRef& noisy, double sigma)
{
    require(sigma > 0.0, "mmse_denoise: sigma must be > 0");
    return noisy + sigma * sigma * p.score(noisy, sigma * sigma);
}

// (d/2)(1 + log(2 pi sigma^2)): entropy of N(x, sigma^2 I).
inline double kl_constant(std::size_t d, double sigma)
{
    require(d >= 1 && sigma > 0.0, "kl_constant: need d >= 1 and sigma > 0");
    return 0.5 * static_cast<double>(d) * (1.0 + std::log(2.0 * std::numbers::pi * sigma * sigma));
}

// ---------------------------------------------------------------------------
// Quadrature over a standard normal in R^d.

struct GaussHermite {
    int order;
};

// Draws restart from `seed` on every evaluation, so repeated calls share samples.
struct MonteCarlo {
    std::size_t samples;
    std::uint64_t seed;
};

class QuadratureSpec {
public:
    using Scheme = std::variant<GaussHermite, MonteCarlo>;

    static QuadratureSpec gauss_hermite(int order)
    {
        require(order >= 1, "Gauss-Hermite order must be >= 1");
        return QuadratureSpec(GaussHermite{order});
    }
    static QuadratureSpec monte_carlo(std::size_t samples, std::uint64_t seed = 0)
    {
        require(samples >= 1, "Monte Carlo needs at least one sample");
        return QuadratureSpec(MonteCarlo{samples, seed});
    }
    static QuadratureSpec default_for(std::size_t d)
    {
        return d <= 2 ? gauss_hermite(20) : monte_carlo(100000, 0);
    }

    const Scheme& scheme() const { return scheme_; }

    std::string describe() const
    {
        if (auto* g = std::get_if<GaussHermite>(&scheme_)) return "gauss-hermite-" + std::to_string(g->order);
        return "monte-carlo-" + std::to_string(std::get<MonteCarlo>(scheme_).samples);
    }

    // Calls visit(weight, node) over nodes of E[f(zeta)], zeta ~ N(0, I_d).
    template <class Visit>
    void for_each_node(std::size_t d, Visit&& visit) const
    {
        Vector node(static_cast<Eigen::Index>(d));
        if (auto* mc = std::get_if<MonteCarlo>(&scheme_)) {
            require(mc->samples >= 1, "Monte Carlo needs at least one sample");
            SeedStream stream(mc->seed);
            const double w = 1.0 / static_cast<double>(mc->samples);
            for (std::size_t s = 0; s < mc->samples; ++s) {
                for (std::size_t j = 0; j < d; ++j) node[static_cast<Eigen::Index>(j)] = stream.normal();
                visit(w, node);
            }
            return;
        }
        const auto& rule = hermite_rule(std::get<GaussHermite>(scheme_).order);
        const std::size_t n = rule.nodes.size();
        double total = 1.0;
        for (std::size_t j = 0; j < d; ++j) total *= static_cast<double>(n);
        require(total <= 5e7, "Gauss-Hermite tensor grid too large for dimension " + std::to_string(d));
        std::vector<std::size_t> idx(d, 0);
        for (;;) {
            double w = 1.0;
            for (std::size_t j = 0; j < d; ++j) {
                node[static_cast<Eigen::Index>(j)] = rule.nodes[idx[j]];
                w *= rule.weights[idx[j]];
            }
            visit(w, node);
            std::size_t j = 0;
            while (j < d && ++idx[j] == n) idx[j++] = 0;
            if (j == d) break;
        }
    }

    struct Rule {
        std::vector<double> nodes;
        std::vector<double> weights;
    };

    // Probabilists' Gauss-Hermite rule (weights sum to 1) via Golub-Welsch.
    static const Rule& hermite_rule(int n)
    {
        thread_local std::map<int, Rule> cache;
        if (auto it = cache.find(n); it != cache.end()) return it->second;
        Matrix jacobi = Matrix::Zero(n, n);
        for (int k = 1; k < n; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
        Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
        Rule r;
        for (int k = 0; k < n; ++k) {
            r.nodes.push_back(eig.eigenvalues()[k]);
            const double v = eig.eigenvectors()(0, k);
            r.weights.push_back(v * v);
        }
        return cache.emplace(n, std::move(r)).first->second;
    }

private:
    explicit QuadratureSpec(Scheme s) : scheme_(s) {}
    Scheme scheme_;
};

// grad R_sigma(x) = -E[grad log p_sigma(x + sigma zeta)] (descent direction on R_sigma).
inline Vector snore_grad(const GmmPrior& p, const VectorRef& x, double sigma, const QuadratureSpec& quad)
{
    require(sigma > 0.0, "snore_grad: sigma must be > 0");
    const double s2 = sigma * sigma;
    Vector acc = Vector::Zero(x.size());
    Vector shifted(x.size());
    quad.for_each_node(p.dimension(), [&](double w, const Vector& zeta) {
        shifted = x + sigma * zeta;
        acc -= w * p.score(shifted, s2);
    });
    return acc;
}

// R_sigma(x) = -E[log p_sigma(x + sigma zeta)].
inline double snore_value(const GmmPrior& p, const VectorRef& x, double sigma, const QuadratureSpec& quad)
{
    require(sigma > 0.0, "snore_value: sigma must be > 0");
    const double s2 = sigma * sigma;
    double acc = 0.0;
    Vector shifted(x.size());
    quad.for_each_node(p.dimension(), [&](double w, const Vector& zeta) {
        shifted = x + sigma * zeta;
        acc -= w * p.log_density(shifted, s2);
    });
    return acc;
}

// Closed-form R_sigma for a single Gaussian:
// 1/2 log det(2 pi S) + 1/2 (x-m)^T S^{-1} (x-m) + 1/2 sigma^2 Tr(S^{-1}), S = C + sigma^2 I.
inline double gaussian_snore_value(const GmmPrior& p, const VectorRef& x, double sigma)
{
    require(p.size() == 1, "gaussian_snore_value: single-component prior required");
    const double s2 = sigma * sigma;
    const Matrix prec = p.inflated_precision(0, s2);
    const Vector r = x - p.component(0).mean;
    const double d = static_cast<double>(p.dimension());
    return 0.5 * (d * std::log(2.0 * std::numbers::pi) + p.inflated_log_det(0, s2)) + 0.5 * r.dot(prec * r) +
           0.5 * s2 * prec.trace();
}

// ---------------------------------------------------------------------------
// Denoisers as seen by the solvers: flat vectors in, flat vectors out.

// Value/gradient access to the regularizers a denoiser implies. Used for logging J and grad J.
struct RegularizerOracle {
    // -log p_sigma(x), possibly up to an x-independent constant.
    std::function<double(std::span<const double>, double)> pnp_value;
    // R_sigma(x), same convention.
    std::function<double(std::span<const double>, double)> snore_value;
    // grad R_sigma(x).
    std::function<std::vector<double>(std::span<const double>, double)> snore_grad;
    // How snore_value/snore_grad are evaluated, e.g. "closed-form".
    std::string estimator;
};

class DenoiserHandle {
public:
    using Fn = std::function<void(std::span<const double> noisy, double sigma, std::span<double> out)>;

    DenoiserHandle(Fn fn, std::string descriptor, std::shared_ptr<const RegularizerOracle> oracle = nullptr)
        : fn_(std::move(fn)), descriptor_(std::move(descriptor)), oracle_(std::move(oracle))
    {
        require(static_cast<bool>(fn_), "denoiser: empty function");
    }

    void operator()(std::span<const double> noisy, double sigma, std::span<double> out) const
    {
        require(sigma > 0.0, "denoiser: sigma must be > 0");
        if (out.size() != noisy.size()) throw ShapeError("denoiser: output size differs from input size");
        fn_(noisy, sigma, out);
    }

    ImageGrid apply(const ImageGrid& noisy, double sigma) const
    {
        ImageGrid out(noisy.shape());
        (*this)(noisy.values(), sigma, out.values());
        return out;
    }

    const std::string& descriptor() const { return descriptor_; }
    const RegularizerOracle* oracle() const { return oracle_.get(); }
    std::shared_ptr<const RegularizerOracle> shared_oracle() const { return oracle_; }

private:
    Fn fn_;
    std::string descriptor_;
    std::shared_ptr<const RegularizerOracle> oracle_;
};

namespace detail {

inline Eigen::Map<const Vector> as_vector(std::span<const double> s)
{
    return {s.data(), static_cast<Eigen::Index>(s.size())};
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

// Oracle for a GMM over the full vector: closed form for one component, Gauss-Hermite
// for d <= 2, fixed-seed Monte Carlo otherwise.
inline std::shared_ptr<RegularizerOracle> gmm_oracle(std::shared_ptr<const GmmPrior> prior)
{
    auto o = std::make_shared<RegularizerOracle>();
    const std::size_t d = prior->dimension();
    const bool closed = prior->size() == 1;
    const QuadratureSpec quad = d <= 2 ? QuadratureSpec::gauss_hermite(20) : QuadratureSpec::monte_carlo(2048, 0x5eed);
    o->estimator = closed ? "closed-form" : quad.describe();
    o->pnp_value = [prior](std::span<const double> x, double sigma) { return -log_smoothed(*prior, as_vector(x), sigma); };
    o->snore_value = [prior, closed, quad](std::span<const double> x, double sigma) {
        return closed ? gaussian_snore_value(*prior, as_vector(x), sigma) : snore_value(*prior, as_vector(x), sigma, quad);
    };
    o->snore_grad = [prior, closed, quad](std::span<const double> x, double sigma) {
        if (closed) {
            const double s2 = sigma * sigma;
            return to_std(prior->inflated_precision(0, s2) * (as_vector(x) - prior->component(0).mean));
        }
        return to_std(snore_grad(*prior, as_vector(x), sigma, quad));
    };
    return o;
}

} // namespace detail

// The exact MMSE denoiser of a GMM acting on the whole vector.
inline DenoiserHandle exact_denoiser(std::shared_ptr<const GmmPrior> prior)
{
    auto oracle = detail::gmm_oracle(prior);
    auto fn = [prior](std::span<const double> noisy, double sigma, std::span<double> out) {
        if (noisy.size() != prior->dimension()) throw ShapeError("exact GMM denoiser: dimension mismatch");
        const Vector d = mmse_denoise(*prior, detail::as_vector(noisy), sigma);
        std::copy(d.data(), d.data() + d.size(), out.begin());
    };
    return DenoiserHandle(fn, "gmm-mmse(K=" + std::to_string(prior->size()) + ",d=" + std::to_string(prior->dimension()) + ")",
                          std::move(oracle));
}

// Exact GMM denoiser on non-overlapping p x p patches of each channel; the prior has dimension p*p.
inline DenoiserHandle patch_denoiser(std::shared_ptr<const GmmPrior> prior, std::size_t patch, Shape image)
{
    require(patch >= 1 && prior->dimension() == patch * patch, "patch denoiser: prior dimension must be patch^2");
    if (image.height % patch || image.width % patch)
        throw ShapeError("patch denoiser: image " + image.str() + " not divisible by patch " + std::to_string(patch));

    // Visit every patch as a gathered vector; scatter back when `out` is given.
    auto for_patches = [image, patch](std::span<const double> x, auto&& body) {
        if (x.size() != image.size()) throw ShapeError("patch denoiser: image size mismatch");
        Vector v(static_cast<Eigen::Index>(patch * patch));
        for (std::size_t c = 0; c < image.channels; ++c)
            for (std::size_t bi = 0; bi < image.height; bi += patch)
                for (std::size_t bj = 0; bj < image.width; bj += patch) {
                    auto index = [&](std::size_t a, std::size_t b) {
                        return ((bi + a) * image.width + (bj + b)) * image.channels + c;
                    };
                    for (std::size_t a = 0; a < patch; ++a)
                        for (std::size_t b = 0; b < patch; ++b) v[static_cast<Eigen::Index>(a * patch + b)] = x[index(a, b)];
                    body(v, index);
                }
    };

    auto inner = detail::gmm_oracle(prior);
    auto oracle = std::make_shared<RegularizerOracle>();
    oracle->estimator = inner->estimator;
    oracle->pnp_value = [inner, for_patches](std::span<const double> x, double sigma) {
        double acc = 0.0;
        for_patches(x, [&](const Vector& v, auto&&) { acc += inner->pnp_value({v.data(), static_cast<std::size_t>(v.size())}, sigma); });
        return acc;
    };
    oracle->snore_value = [inner, for_patches](std::span<const double> x, double sigma) {
        double acc = 0.0;
        for_patches(x, [&](const Vector& v, auto&&) { acc += inner->snore_value({v.data(), static_cast<std::size_t>(v.size())}, sigma); });
        return acc;
    };
    oracle->snore_grad = [inner, for_patches, patch](std::span<const double> x, double sigma) {
        std::vector<double> g(x.size());
        for_patches(x, [&](const Vector& v, auto&& index) {
            const auto gp = inner->snore_grad({v.data(), static_cast<std::size_t>(v.size())}, sigma);
            for (std::size_t a = 0; a < patch; ++a)
                for (std::size_t b = 0; b < patch; ++b) g[index(a, b)] = gp[a * patch + b];
        });
        return g;
    };

    auto fn = [prior, for_patches, patch](std::span<const double> noisy, double sigma, std::span<double> out) {
        for_patches(noisy, [&](const Vector& v, auto&& index) {
            const Vector d = mmse_denoise(*prior, v, sigma);
            for (std::size_t a = 0; a < patch; ++a)
                for (std::size_t b = 0; b < patch; ++b) out[index(a, b)] = d[static_cast<Eigen::Index>(a * patch + b)];
        });
    };
    return DenoiserHandle(fn, "gmm-mmse-patch(p=" + std::to_string(patch) + ",K=" + std::to_string(prior->size()) + ")",
                          std::move(oracle));
}

// MMSE denoiser of the improper Gaussian prior with precision `strength` times the periodic
// Laplacian: D(x) = F^{-1}[X / (1 + sigma^2 * strength * |w|^2)] per channel.
// Oracle values are exact up to an x-independent constant (the flat DC mode).
inline DenoiserHandle smoothing_denoiser(double strength, Shape image)
{
    require(strength > 0.0 && std::isfinite(strength), "smoothing denoiser: strength must be > 0");
    const std::size_t H = image.height, W = image.width;
    auto symbol = std::make_shared<std::vector<double>>(H * W);
    for (std::size_t u = 0; u < H; ++u)
        for (std::size_t v = 0; v < W; ++v) {
            const double su = std::sin(std::numbers::pi * static_cast<double>(u) / static_cast<double>(H));
            const double sv = std::sin(std::numbers::pi * static_cast<double>(v) / static_cast<double>(W));
            (*symbol)[u * W + v] = strength * 4.0 * (su * su + sv * sv);
        }

    // Applies the Fourier multiplier m(q) to every channel; returns sum_k m(q_k)|X_k|^2 / (HW) when asked.
    auto filter = [image, symbol](std::span<const double> x, auto&& multiplier, std::span<double> out, double* energy) {
        if (x.size() != image.size()) throw ShapeError("smoothing denoiser: image size mismatch");
        const ImageGrid grid(image, std::vector<double>(x.begin(), x.end()));
        const double n = static_cast<double>(image.plane_size());
        for (std::size_t c = 0; c < image.channels; ++c) {
            Spectrum s = fft2(grid.channel(c));
            for (std::size_t k = 0; k < s.data.size(); ++k) {
                const double m = multiplier((*symbol)[k]);
                if (energy) *energy += m * std::norm(s.data[k]) / n;
                s.data[k] *= m;
            }
            if (!out.empty()) {
                const ImageGrid plane = ifft2(std::move(s));
                for (std::size_t k = 0; k < plane.size(); ++k) out[k * image.channels + c] = plane[k];
            }
        }
    };

    auto oracle = std::make_shared<RegularizerOracle>();
    oracle->estimator = "closed-form";
    oracle->pnp_value = [filter](std::span<const double> x, double sigma) {
        const double s2 = sigma * sigma;
        double e = 0.0;
        filter(x, [s2](double q) { return q / (1.0 + s2 * q); }, std::span<double>{}, &e);
        return 0.5 * e;
    };
    oracle->snore_value = [filter, symbol, image](std::span<const double> x, double sigma) {
        const double s2 = sigma * sigma;
        double e = 0.0, trace = 0.0;
        filter(x, [s2](double q) { return q / (1.0 + s2 * q); }, std::span<double>{}, &e);
        for (double q : *symbol) trace += q / (1.0 + s2 * q);
        return 0.5 * e + 0.5 * s2 * trace * static_cast<double>(image.channels);
    };
    oracle->snore_grad = [filter](std::span<const double> x, double sigma) {
        const double s2 = sigma * sigma;
        std::vector<double> g(x.size());
        filter(x, [s2](double q) { return q / (1.0 + s2 * q); }, std::span<double>(g), nullptr);
        return g;
    };

    auto fn = [filter](std::span<const double> noisy, double sigma, std::span<double> out) {
        const double s2 = sigma * sigma;
        filter(noisy, [s2](double q) { return 1.0 / (1.0 + s2 * q); }, out, nullptr);
    };
    return DenoiserHandle(fn, "laplacian-wiener(strength=" + io::fmt(strength) + ")", std::move(oracle));
}

// Wraps `base`, adding offset(sigma) to every output. The oracle of `base` is kept: it
// still describes the objective the ideal denoiser would minimize.
inline DenoiserHandle perturbed_denoiser(DenoiserHandle base, std::function<std::vector<double>(double)> offset)
{
    require(static_cast<bool>(offset), "perturbed denoiser: empty bias profile");
    auto oracle = base.shared_oracle();
    const std::string desc = "perturbed(" + base.descriptor() + ")";
    auto fn = [base = std::move(base), offset = std::move(offset)](std::span<const double> noisy, double sigma,
                                                                   std::span<double> out) {
        base(noisy, sigma, out);
        const auto c = offset(sigma);
        if (c.size() != out.size()) throw ShapeError("perturbed denoiser: offset size mismatch");
        for (std::size_t k = 0; k < out.size(); ++k) {
            if (!std::isfinite(c[k])) throw ValueError("perturbed denoiser: non-finite offset");
            out[k] += c[k];
        }
    };
    return DenoiserHandle(fn, desc, std::move(oracle));
}

// GMM text file: "d K", then per component a weight line, a mean line and d covariance rows.
inline GmmPrior read_gmm(const std::filesystem::path& path)
{
    auto in = io::detail::open_in(path);
    const std::string where = "GMM file '" + path.string() + "'";
    const auto tok = io::detail::text_tokens(in);
    if (tok.size() < 2) throw IoError(where + ": missing header");
    const long d = io::detail::to_int(tok[0], where);
    const long K = io::detail::to_int(tok[1], where);
    if (d < 1 || K < 1) throw IoError(where + ": bad header");
    const std::size_t per = static_cast<std::size_t>(1 + d + d * d);
    if (tok.size() != 2 + per * static_cast<std::size_t>(K))
        throw IoError(where + ": expected " + std::to_string(2 + per * K) + " numbers, got " + std::to_string(tok.size()));
    std::vector<GmmComponent> comps;
    std::size_t at = 2;
    for (long k = 0; k < K; ++k) {
        GmmComponent c{io::detail::to_real(tok[at++], where), Vector(d), Matrix(d, d)};
        for (long j = 0; j < d; ++j) c.mean[j] = io::detail::to_real(tok[at++], where);
        for (long a = 0; a < d; ++a)
            for (long b = 0; b < d; ++b) c.covariance(a, b) = io::detail::to_real(tok[at++], where);
        comps.push_back(std::move(c));
    }
    try {
        return GmmPrior(std::move(comps));
    } catch (const ValueError& e) {
        throw IoError(where + ": " + e.what());
    }
}

inline void write_gmm(const std::filesystem::path& path, const GmmPrior& prior)
{
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    const auto d = static_cast<Eigen::Index>(prior.dimension());
    out << d << " " << prior.size() << "\n";
    for (const auto& c : prior.components()) {
        out << io::fmt(c.weight) << "\n";
        for (Eigen::Index j = 0; j < d; ++j) out << (j ? " " : "") << io::fmt(c.mean[j]);
        out << "\n";
        for (Eigen::Index a = 0; a < d; ++a) {
            for (Eigen::Index b = 0; b < d; ++b) out << (b ? " " : "") << io::fmt(c.covariance(a, b));
            out << "\n";
        }
    }
}

} // namespace snore
