#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "tensor.hpp"

namespace snore {

// Peak 1. Identical inputs give +infinity.
inline double psnr(const ImageGrid& x, const ImageGrid& ref)
{
    require_same_shape(x, ref, "psnr");
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x[k] - ref[k];
        acc += d * d;
    }
    if (acc == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(static_cast<double>(x.size()) / acc);
}

// Mean SSIM over all 8x8 windows (stride 1, uniform weights, population moments), averaged over channels.
inline double ssim(const ImageGrid& x, const ImageGrid& ref)
{
    require_same_shape(x, ref, "ssim");
    constexpr std::size_t win = 8;
    if (x.height() < win || x.width() < win) throw ShapeError("ssim: image smaller than the 8x8 window");
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const double n = win * win;
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t c = 0; c < x.channels(); ++c)
        for (std::size_t i = 0; i + win <= x.height(); ++i)
            for (std::size_t j = 0; j + win <= x.width(); ++j) {
                double sa = 0, sb = 0;
                for (std::size_t a = 0; a < win; ++a)
                    for (std::size_t b = 0; b < win; ++b) {
                        sa += x(i + a, j + b, c);
                        sb += ref(i + a, j + b, c);
                    }
                const double ma = sa / n, mb = sb / n;
                double vaa = 0, vbb = 0, vab = 0;
                for (std::size_t a = 0; a < win; ++a)
                    for (std::size_t b = 0; b < win; ++b) {
                        const double da = x(i + a, j + b, c) - ma;
                        const double db = ref(i + a, j + b, c) - mb;
                        vaa += da * da;
                        vbb += db * db;
                        vab += da * db;
                    }
                vaa /= n, vbb /= n, vab /= n;
                total += ((2 * ma * mb + c1) * (2 * vab + c2)) / ((ma * ma + mb * mb + c1) * (vaa + vbb + c2));
                ++count;
            }
    return total / static_cast<double>(count);
}

// Donoho's MAD estimate on the finest Haar diagonal band: median(|HH|) / 0.6745.
// Channels are pooled into one band.
inline double estimate_noise(const ImageGrid& x)
{
    if (x.height() < 2 || x.width() < 2) throw ShapeError("estimate_noise: image must be at least 2x2");
    std::vector<double> band;
    band.reserve((x.height() / 2) * (x.width() / 2) * x.channels());
    for (std::size_t c = 0; c < x.channels(); ++c)
        for (std::size_t i = 0; i + 1 < x.height(); i += 2)
            for (std::size_t j = 0; j + 1 < x.width(); j += 2) {
                const double hh = 0.5 * ((x(i, j, c) - x(i, j + 1, c)) - (x(i + 1, j, c) - x(i + 1, j + 1, c)));
                band.push_back(std::abs(hh));
            }
    const std::size_t mid = band.size() / 2;
    std::nth_element(band.begin(), band.begin() + static_cast<std::ptrdiff_t>(mid), band.end());
    double med = band[mid];
    if (band.size() % 2 == 0) {
        const double lower = *std::max_element(band.begin(), band.begin() + static_cast<std::ptrdiff_t>(mid));
        med = 0.5 * (med + lower);
    }
    return med / 0.6745;
}

struct MetricReport {
    double psnr;
    bool identical;
    double ssim;
    double sigma_hat;
};

inline MetricReport evaluate(const ImageGrid& x, const ImageGrid& ref)
{
    const double p = psnr(x, ref);
    std::optional<double> s;
    if (x.height() >= 8 && x.width() >= 8) s = ssim(x, ref);
    const bool tiny = x.height() < 2 || x.width() < 2;
    return MetricReport{p, std::isinf(p), s.value_or(std::numeric_limits<double>::quiet_NaN()),
                        tiny ? std::numeric_limits<double>::quiet_NaN() : estimate_noise(x)};
}

} // namespace snore
