#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "errors.hpp"

namespace snore {

struct Shape {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;

    std::size_t size() const { return height * width * channels; }
    std::size_t plane_size() const { return height * width; }
    bool operator==(const Shape&) const = default;

    std::string str() const
    {
        return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
    }
};

// Real H x W x C field, row-major with interleaved channels.
class ImageGrid {
public:
    ImageGrid() = default;

    explicit ImageGrid(Shape shape, double fill = 0.0)
        : shape_(shape), data_(shape.size(), fill)
    {
        validate();
    }

    ImageGrid(std::size_t height, std::size_t width, std::size_t channels = 1, double fill = 0.0)
        : ImageGrid(Shape{height, width, channels}, fill)
    {
    }

    ImageGrid(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data))
    {
        validate();
        if (data_.size() != shape_.size())
            throw ShapeError("ImageGrid: data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_.str());
    }

    const Shape& shape() const { return shape_; }
    std::size_t height() const { return shape_.height; }
    std::size_t width() const { return shape_.width; }
    std::size_t channels() const { return shape_.channels; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j, std::size_t c = 0)
    {
        return data_[(i * shape_.width + j) * shape_.channels + c];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t c = 0) const
    {
        return data_[(i * shape_.width + j) * shape_.channels + c];
    }
    double& operator[](std::size_t k) { return data_[k]; }
    double operator[](std::size_t k) const { return data_[k]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    const std::vector<double>& vector() const { return data_; }

    ImageGrid channel(std::size_t c) const
    {
        ImageGrid plane(shape_.height, shape_.width, 1);
        for (std::size_t k = 0; k < shape_.plane_size(); ++k)
            plane.data_[k] = data_[k * shape_.channels + c];
        return plane;
    }

    void set_channel(std::size_t c, const ImageGrid& plane)
    {
        if (plane.height() != height() || plane.width() != width() || plane.channels() != 1)
            throw ShapeError("set_channel: plane shape mismatch");
        for (std::size_t k = 0; k < shape_.plane_size(); ++k)
            data_[k * shape_.channels + c] = plane.data_[k];
    }

    ImageGrid& operator+=(const ImageGrid& o)
    {
        check(o, "+=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }
    ImageGrid& operator-=(const ImageGrid& o)
    {
        check(o, "-=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
        return *this;
    }
    ImageGrid& operator*=(double s)
    {
        for (double& v : data_) v *= s;
        return *this;
    }

    // this += s * o
    ImageGrid& axpy(double s, const ImageGrid& o)
    {
        check(o, "axpy");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += s * o.data_[k];
        return *this;
    }

    friend ImageGrid operator+(ImageGrid a, const ImageGrid& b) { return a += b; }
    friend ImageGrid operator-(ImageGrid a, const ImageGrid& b) { return a -= b; }
    friend ImageGrid operator*(ImageGrid a, double s) { return a *= s; }
    friend ImageGrid operator*(double s, ImageGrid a) { return a *= s; }

    bool operator==(const ImageGrid&) const = default;

private:
    void validate() const
    {
        if (shape_.height == 0 || shape_.width == 0)
            throw ShapeError("ImageGrid: height and width must be positive");
        if (shape_.channels != 1 && shape_.channels != 3)
            throw ShapeError("ImageGrid: channels must be 1 or 3");
    }

    void check(const ImageGrid& o, const char* op) const
    {
        if (o.shape_ != shape_)
            throw ShapeError(std::string("ImageGrid ") + op + ": " + shape_.str() + " vs " + o.shape_.str());
    }

    Shape shape_{};
    std::vector<double> data_;
};

inline void require_same_shape(const ImageGrid& a, const ImageGrid& b, const std::string& where)
{
    if (a.shape() != b.shape())
        throw ShapeError(where + ": shape " + a.shape().str() + " vs " + b.shape().str());
}

inline double dot(const ImageGrid& a, const ImageGrid& b)
{
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline double squared_norm(const ImageGrid& a) { return dot(a, a); }
inline double norm(const ImageGrid& a) { return std::sqrt(squared_norm(a)); }

inline double max_abs(const ImageGrid& a)
{
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

inline bool all_finite(const ImageGrid& a)
{
    return std::all_of(a.values().begin(), a.values().end(), [](double v) { return std::isfinite(v); });
}

// Elementwise map, returns a new grid.
template <class F>
ImageGrid map(const ImageGrid& a, F&& f)
{
    ImageGrid out(a.shape());
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = f(a[k]);
    return out;
}

// One complex plane, row-major.
struct Spectrum {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::complex<double>> data;

    Spectrum() = default;
    Spectrum(std::size_t h, std::size_t w, std::complex<double> fill = {})
        : height(h), width(w), data(h * w, fill)
    {
    }

    std::complex<double>& operator()(std::size_t u, std::size_t v) { return data[u * width + v]; }
    std::complex<double> operator()(std::size_t u, std::size_t v) const { return data[u * width + v]; }
};

namespace detail {

inline Eigen::FFT<double>& fft_engine()
{
    // kissfft caches twiddles per length; one engine per thread keeps it race-free
    thread_local Eigen::FFT<double> engine;
    return engine;
}

// In-place 2D transform by rows then columns. Inverse includes the 1/(HW) factor.
inline void transform2(Spectrum& s, bool inverse)
{
    auto& fft = fft_engine();
    std::vector<std::complex<double>> in, out;

    // kissfft does not handle length 1, where the DFT is the identity
    in.resize(s.width);
    for (std::size_t i = 0; s.width > 1 && i < s.height; ++i) {
        std::copy_n(s.data.begin() + i * s.width, s.width, in.begin());
        inverse ? fft.inv(out, in) : fft.fwd(out, in);
        std::copy_n(out.begin(), s.width, s.data.begin() + i * s.width);
    }
    in.resize(s.height);
    for (std::size_t j = 0; s.height > 1 && j < s.width; ++j) {
        for (std::size_t i = 0; i < s.height; ++i) in[i] = s.data[i * s.width + j];
        inverse ? fft.inv(out, in) : fft.fwd(out, in);
        for (std::size_t i = 0; i < s.height; ++i) s.data[i * s.width + j] = out[i];
    }
}

} // namespace detail

// Unnormalized forward DFT of a single-channel field.
inline Spectrum fft2(const ImageGrid& plane)
{
    if (plane.channels() != 1) throw ShapeError("fft2 expects a single channel");
    Spectrum s(plane.height(), plane.width());
    for (std::size_t k = 0; k < plane.size(); ++k) s.data[k] = plane[k];
    detail::transform2(s, false);
    return s;
}

// Real part of the inverse DFT, normalized by 1/(HW).
inline ImageGrid ifft2(Spectrum s)
{
    detail::transform2(s, true);
    ImageGrid out(s.height, s.width, 1);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = s.data[k].real();
    return out;
}

// Deterministic random source: mt19937_64 for bits, Box-Muller for normals.
// Seeds are scrambled with splitmix64 so that nearby seeds give unrelated streams.
class SeedStream {
public:
    explicit SeedStream(std::uint64_t seed = 0) : seed_(seed), engine_(splitmix64(seed)) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    // Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform()
    {
        ++counter_;
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            ++counter_;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        counter_ -= 1; // two uniforms buy two normals; count normals handed out
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Gamma(shape k, scale 1) by Marsaglia-Tsang.
    double gamma(double k)
    {
        if (!(k > 0.0)) throw ValueError("gamma shape must be positive");
        if (k < 1.0) return gamma(k + 1.0) * std::pow(uniform(), 1.0 / k);
        const double d = k - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double z, v;
            do {
                z = normal();
                v = 1.0 + c * z;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (std::log(u) < 0.5 * z * z + d - d * v + d * std::log(v)) return d * v;
        }
    }

    // Independent child stream keyed by `key`; does not advance this stream.
    SeedStream split(std::uint64_t key) const { return SeedStream(splitmix64(seed_ ^ splitmix64(key + 0x51ed))); }

    static std::uint64_t splitmix64(std::uint64_t z)
    {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline ImageGrid sample_gaussian(SeedStream& stream, Shape shape, double std_dev)
{
    if (!(std_dev >= 0.0)) throw ValueError("sample_gaussian: std must be >= 0");
    ImageGrid out(shape);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std_dev * stream.normal();
    return out;
}

} // namespace snore
