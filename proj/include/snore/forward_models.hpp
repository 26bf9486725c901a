#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <variant>

#include "errors.hpp"
#include "tensor.hpp"

namespace snore {

// Embed a small kernel into an H x W plane with its center (h/2, w/2) wrapped to (0,0).
inline ImageGrid pad_kernel(const ImageGrid& kernel, std::size_t height, std::size_t width)
{
    if (kernel.channels() != 1) throw ShapeError("kernel must be single-channel");
    if (kernel.height() > height || kernel.width() > width)
        throw ShapeError("kernel " + kernel.shape().str() + " larger than image " + std::to_string(height) + "x" +
                         std::to_string(width));
    if (!all_finite(kernel)) throw ValueError("kernel has non-finite entries");
    ImageGrid plane(height, width, 1);
    const std::size_t ci = kernel.height() / 2, cj = kernel.width() / 2;
    for (std::size_t a = 0; a < kernel.height(); ++a)
        for (std::size_t b = 0; b < kernel.width(); ++b) {
            const std::size_t i = (a + height - ci) % height;
            const std::size_t j = (b + width - cj) % width;
            plane(i, j) += kernel(a, b);
        }
    return plane;
}

// Apply a plane -> plane map to each channel.
template <class F>
ImageGrid per_channel(const ImageGrid& img, Shape out_shape, F&& f)
{
    ImageGrid out(out_shape);
    for (std::size_t c = 0; c < img.channels(); ++c) out.set_channel(c, f(img.channel(c), c));
    return out;
}

struct CircularBlur {
    ImageGrid kernel;
    double sigma_y;
};

struct Mask {
    ImageGrid mask;
};

struct DecimatedBlur {
    ImageGrid kernel;
    std::size_t factor;
    double sigma_y;
};

struct Speckle {
    double looks;
};

// Forward operator plus the data-fidelity F(x, y) it induces.
class DegradationModel {
public:
    using Kind = std::variant<CircularBlur, Mask, DecimatedBlur, Speckle>;

    static DegradationModel circular_blur(const ImageGrid& kernel, double sigma_y, Shape image)
    {
        require(sigma_y > 0.0 && std::isfinite(sigma_y), "circular blur: sigma_y must be > 0");
        DegradationModel m(CircularBlur{kernel, sigma_y}, image, image);
        m.spectrum_ = fft2(pad_kernel(kernel, image.height, image.width));
        return m;
    }

    // A single-channel mask is broadcast over the channels of `image`.
    static DegradationModel mask(const ImageGrid& mask, Shape image)
    {
        if (mask.height() != image.height || mask.width() != image.width ||
            (mask.channels() != 1 && mask.channels() != image.channels))
            throw ShapeError("mask " + mask.shape().str() + " incompatible with image " + image.str());
        ImageGrid full(image);
        for (std::size_t i = 0; i < image.height; ++i)
            for (std::size_t j = 0; j < image.width; ++j)
                for (std::size_t c = 0; c < image.channels; ++c) {
                    const double v = mask(i, j, mask.channels() == 1 ? 0 : c);
                    if (v != 0.0 && v != 1.0) throw ValueError("mask entries must be 0 or 1");
                    full(i, j, c) = v;
                }
        return DegradationModel(Mask{std::move(full)}, image, image);
    }

    static DegradationModel decimated_blur(const ImageGrid& kernel, std::size_t factor, double sigma_y, Shape image)
    {
        require(factor >= 1, "decimated blur: factor must be >= 1");
        require(sigma_y > 0.0 && std::isfinite(sigma_y), "decimated blur: sigma_y must be > 0");
        if (image.height % factor || image.width % factor)
            throw ShapeError("image " + image.str() + " not divisible by factor " + std::to_string(factor));
        Shape low{image.height / factor, image.width / factor, image.channels};
        DegradationModel m(DecimatedBlur{kernel, factor, sigma_y}, image, low);
        m.spectrum_ = fft2(pad_kernel(kernel, image.height, image.width));
        return m;
    }

    static DegradationModel speckle(double looks, Shape image)
    {
        require(looks > 0.0 && std::isfinite(looks), "speckle: looks must be > 0");
        return DegradationModel(Speckle{looks}, image, image);
    }

    const Kind& kind() const { return kind_; }
    const Shape& input_shape() const { return input_; }
    const Shape& observation_shape() const { return observed_; }

    std::string name() const
    {
        return std::visit(
            [](const auto& k) -> std::string {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, CircularBlur>) return "circular_blur";
                else if constexpr (std::is_same_v<T, Mask>) return "mask";
                else if constexpr (std::is_same_v<T, DecimatedBlur>) return "decimated_blur";
                else return "speckle";
            },
            kind_);
    }

    bool is_linear() const { return !std::holds_alternative<Speckle>(kind_); }
    bool has_prox() const { return is_linear(); }

    // Noise std of the Gaussian models, 0 otherwise.
    double sigma_y() const
    {
        if (auto* b = std::get_if<CircularBlur>(&kind_)) return b->sigma_y;
        if (auto* d = std::get_if<DecimatedBlur>(&kind_)) return d->sigma_y;
        return 0.0;
    }

    // A x for the linear kinds.
    ImageGrid forward(const ImageGrid& x) const
    {
        check_input(x, "forward");
        if (std::holds_alternative<CircularBlur>(kind_)) return blur(x, false);
        if (auto* m = std::get_if<Mask>(&kind_)) return multiply(x, m->mask);
        if (auto* d = std::get_if<DecimatedBlur>(&kind_)) return subsample(blur(x, false), d->factor);
        throw UnsupportedError("forward: speckle model has no linear operator");
    }

    // A^T v for the linear kinds.
    ImageGrid adjoint(const ImageGrid& v) const
    {
        check_observation(v, "adjoint");
        if (std::holds_alternative<CircularBlur>(kind_)) return blur(v, true);
        if (auto* m = std::get_if<Mask>(&kind_)) return multiply(v, m->mask);
        if (auto* d = std::get_if<DecimatedBlur>(&kind_)) return blur(upsample(v, d->factor), true);
        throw UnsupportedError("adjoint: speckle model has no linear operator");
    }

    ImageGrid degrade(const ImageGrid& x, SeedStream& stream) const
    {
        check_input(x, "degrade");
        if (auto* s = std::get_if<Speckle>(&kind_)) {
            // log-intensity: y = x + log N, N ~ Gamma(L, 1/L)
            ImageGrid y(x.shape());
            for (std::size_t k = 0; k < x.size(); ++k) y[k] = x[k] + std::log(stream.gamma(s->looks) / s->looks);
            return y;
        }
        ImageGrid y = forward(x);
        if (double sy = sigma_y(); sy > 0.0) y += sample_gaussian(stream, y.shape(), sy);
        return y;
    }

    double fidelity_value(const ImageGrid& x, const ImageGrid& y) const
    {
        check_input(x, "fidelity_value");
        check_observation(y, "fidelity_value");
        if (auto* s = std::get_if<Speckle>(&kind_)) {
            double acc = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) acc += x[k] + std::exp(y[k] - x[k]);
            return s->looks * acc;
        }
        if (auto* m = std::get_if<Mask>(&kind_)) return 0.5 * squared_norm(multiply(x - y, m->mask));
        const double sy = sigma_y();
        return 0.5 * squared_norm(forward(x) - y) / (sy * sy);
    }

    ImageGrid fidelity_grad(const ImageGrid& x, const ImageGrid& y) const
    {
        check_input(x, "fidelity_grad");
        check_observation(y, "fidelity_grad");
        if (auto* s = std::get_if<Speckle>(&kind_)) {
            ImageGrid g(x.shape());
            for (std::size_t k = 0; k < x.size(); ++k) g[k] = s->looks * (1.0 - std::exp(y[k] - x[k]));
            return g;
        }
        if (auto* m = std::get_if<Mask>(&kind_)) return multiply(x - y, m->mask);
        const double sy = sigma_y();
        return adjoint(forward(x) - y) * (1.0 / (sy * sy));
    }

    // argmin_u 1/2 |u - z|^2 + step * F(u, y); the mask kind returns the projection onto observed pixels.
    ImageGrid fidelity_prox(const ImageGrid& z, const ImageGrid& y, double step) const
    {
        check_input(z, "fidelity_prox");
        check_observation(y, "fidelity_prox");
        require(step > 0.0, "fidelity_prox: step must be > 0");
        if (auto* m = std::get_if<Mask>(&kind_)) {
            ImageGrid u = z;
            for (std::size_t k = 0; k < u.size(); ++k)
                if (m->mask[k] != 0.0) u[k] = y[k];
            return u;
        }
        if (auto* b = std::get_if<CircularBlur>(&kind_)) return blur_prox(z, y, step / (b->sigma_y * b->sigma_y));
        if (auto* d = std::get_if<DecimatedBlur>(&kind_))
            return decimated_prox(z, y, step / (d->sigma_y * d->sigma_y), d->factor);
        throw UnsupportedError("fidelity_prox: speckle fidelity has no closed-form prox; use a gradient solver");
    }

    const Spectrum& kernel_spectrum() const { return spectrum_; }

private:
    DegradationModel(Kind kind, Shape input, Shape observed) : kind_(std::move(kind)), input_(input), observed_(observed)
    {
        if (input.size() == 0) throw ShapeError("degradation model: empty image shape");
    }

    void check_input(const ImageGrid& x, const char* op) const
    {
        if (x.shape() != input_)
            throw ShapeError(std::string(op) + ": input " + x.shape().str() + ", model expects " + input_.str());
    }
    void check_observation(const ImageGrid& y, const char* op) const
    {
        if (y.shape() != observed_)
            throw ShapeError(std::string(op) + ": observation " + y.shape().str() + ", model expects " + observed_.str());
    }

    static ImageGrid multiply(const ImageGrid& a, const ImageGrid& b)
    {
        ImageGrid out = a;
        for (std::size_t k = 0; k < out.size(); ++k) out[k] *= b[k];
        return out;
    }

    ImageGrid blur(const ImageGrid& x, bool transpose) const
    {
        return per_channel(x, x.shape(), [&](const ImageGrid& plane, std::size_t) {
            Spectrum s = fft2(plane);
            for (std::size_t k = 0; k < s.data.size(); ++k)
                s.data[k] *= transpose ? std::conj(spectrum_.data[k]) : spectrum_.data[k];
            return ifft2(std::move(s));
        });
    }

    static ImageGrid subsample(const ImageGrid& x, std::size_t f)
    {
        ImageGrid out(x.height() / f, x.width() / f, x.channels());
        for (std::size_t i = 0; i < out.height(); ++i)
            for (std::size_t j = 0; j < out.width(); ++j)
                for (std::size_t c = 0; c < out.channels(); ++c) out(i, j, c) = x(i * f, j * f, c);
        return out;
    }

    static ImageGrid upsample(const ImageGrid& v, std::size_t f)
    {
        ImageGrid out(v.height() * f, v.width() * f, v.channels());
        for (std::size_t i = 0; i < v.height(); ++i)
            for (std::size_t j = 0; j < v.width(); ++j)
                for (std::size_t c = 0; c < v.channels(); ++c) out(i * f, j * f, c) = v(i, j, c);
        return out;
    }

    // (I + t A^T A)^{-1} (z + t A^T y), A circulant.
    ImageGrid blur_prox(const ImageGrid& z, const ImageGrid& y, double t) const
    {
        return per_channel(z, z.shape(), [&](const ImageGrid& zc, std::size_t c) {
            Spectrum Z = fft2(zc);
            const Spectrum Y = fft2(y.channel(c));
            for (std::size_t k = 0; k < Z.data.size(); ++k) {
                const auto lam = spectrum_.data[k];
                Z.data[k] = (Z.data[k] + t * std::conj(lam) * Y.data[k]) / (1.0 + t * std::norm(lam));
            }
            return ifft2(std::move(Z));
        });
    }

    // Woodbury on (I + t H^T S^T S H): the low-resolution system is diagonal after
    // folding the full spectrum over an f x f row-major paving of frequency blocks.
    ImageGrid decimated_prox(const ImageGrid& z, const ImageGrid& y, double t, std::size_t f) const
    {
        const ImageGrid rhs = z + adjoint(y) * t;
        const std::size_t H = input_.height, W = input_.width;
        const std::size_t h = H / f, w = W / f;
        const double inv_blocks = 1.0 / static_cast<double>(f * f);
        return per_channel(rhs, rhs.shape(), [&](const ImageGrid& rc, std::size_t) {
            Spectrum R = fft2(rc);
            Spectrum folded(h, w);
            for (std::size_t u = 0; u < h; ++u)
                for (std::size_t v = 0; v < w; ++v) {
                    std::complex<double> num{};
                    double energy = 0.0;
                    for (std::size_t p = 0; p < f; ++p)
                        for (std::size_t q = 0; q < f; ++q) {
                            const std::size_t k = (u + p * h) * W + (v + q * w);
                            num += spectrum_.data[k] * R.data[k];
                            energy += std::norm(spectrum_.data[k]);
                        }
                    folded(u, v) = (num * inv_blocks) / (1.0 + t * inv_blocks * energy);
                }
            for (std::size_t a = 0; a < H; ++a)
                for (std::size_t b = 0; b < W; ++b)
                    R(a, b) -= t * std::conj(spectrum_(a, b)) * folded(a % h, b % w);
            return ifft2(std::move(R));
        });
    }

    Kind kind_;
    Shape input_;
    Shape observed_;
    Spectrum spectrum_;
};

} // namespace snore
