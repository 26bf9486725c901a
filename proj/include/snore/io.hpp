#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "tensor.hpp"

namespace snore::io {

namespace detail {

inline std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in)
{
    std::ifstream in(path, mode);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return in;
}

// Next whitespace-delimited header token, skipping '#' comments.
inline std::string pnm_token(std::istream& in)
{
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

// Strip '#' comments and return remaining whitespace tokens.
inline std::vector<std::string> text_tokens(std::istream& in)
{
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) out.push_back(tok);
    }
    return out;
}

inline double to_real(const std::string& tok, const std::string& where)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != tok.size() || !std::isfinite(v)) throw IoError(where + ": bad number '" + tok + "'");
    return v;
}

inline long to_int(const std::string& tok, const std::string& where)
{
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(tok, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != tok.size()) throw IoError(where + ": bad integer '" + tok + "'");
    return v;
}

} // namespace detail

// Binary or ASCII PGM/PPM, 8-bit. Pixel k is mapped to k/maxval.
inline ImageGrid read_pnm(const std::filesystem::path& path)
{
    auto in = detail::open_in(path, std::ios::binary);
    const std::string where = "'" + path.string() + "'";
    const std::string magic = detail::pnm_token(in);
    std::size_t channels;
    bool binary;
    if (magic == "P5") channels = 1, binary = true;
    else if (magic == "P6") channels = 3, binary = true;
    else if (magic == "P2") channels = 1, binary = false;
    else if (magic == "P3") channels = 3, binary = false;
    else throw IoError(where + ": not a PGM/PPM file");

    const long w = detail::to_int(detail::pnm_token(in), where);
    const long h = detail::to_int(detail::pnm_token(in), where);
    const long maxval = detail::to_int(detail::pnm_token(in), where);
    if (w <= 0 || h <= 0) throw IoError(where + ": bad dimensions");
    if (maxval <= 0 || maxval > 255) throw IoError(where + ": only 8-bit images are supported");

    ImageGrid img(static_cast<std::size_t>(h), static_cast<std::size_t>(w), channels);
    if (binary) {
        std::vector<unsigned char> raw(img.size());
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw IoError(where + ": truncated pixel data");
        for (std::size_t k = 0; k < raw.size(); ++k) img[k] = raw[k] / static_cast<double>(maxval);
    } else {
        for (std::size_t k = 0; k < img.size(); ++k) {
            const std::string tok = detail::pnm_token(in);
            if (tok.empty()) throw IoError(where + ": truncated pixel data");
            img[k] = detail::to_int(tok, where) / static_cast<double>(maxval);
        }
    }
    return img;
}

// Binary PGM (1 channel) or PPM (3 channels); values are clamped to [0,1] here only.
inline void write_pnm(const std::filesystem::path& path, const ImageGrid& img)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << (img.channels() == 1 ? "P5" : "P6") << "\n" << img.width() << " " << img.height() << "\n255\n";
    std::vector<unsigned char> raw(img.size());
    for (std::size_t k = 0; k < img.size(); ++k) {
        const double v = std::clamp(img[k], 0.0, 1.0);
        raw[k] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// Kernel text file: "h w" then h*w reals, row-major.
inline ImageGrid read_kernel(const std::filesystem::path& path)
{
    auto in = detail::open_in(path);
    const std::string where = "kernel '" + path.string() + "'";
    const auto tok = detail::text_tokens(in);
    if (tok.size() < 2) throw IoError(where + ": missing header");
    const long h = detail::to_int(tok[0], where);
    const long w = detail::to_int(tok[1], where);
    if (h <= 0 || w <= 0) throw IoError(where + ": bad dimensions");
    if (tok.size() != 2 + static_cast<std::size_t>(h * w))
        throw IoError(where + ": expected " + std::to_string(h * w) + " entries, got " + std::to_string(tok.size() - 2));
    ImageGrid k(static_cast<std::size_t>(h), static_cast<std::size_t>(w), 1);
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = detail::to_real(tok[2 + i], where);
    return k;
}

inline void write_kernel(const std::filesystem::path& path, const ImageGrid& kernel)
{
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << kernel.height() << " " << kernel.width() << "\n";
    char buf[64];
    for (std::size_t i = 0; i < kernel.height(); ++i) {
        for (std::size_t j = 0; j < kernel.width(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", kernel(i, j));
            out << (j ? " " : "") << buf;
        }
        out << "\n";
    }
}

// Mask PGM: pixel >= 128 means observed.
inline ImageGrid read_mask(const std::filesystem::path& path)
{
    ImageGrid m = read_pnm(path);
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = (m[k] * 255.0 >= 127.5) ? 1.0 : 0.0;
    return m;
}

// Shortest round-trip decimal representation used in every CSV we emit.
inline std::string fmt(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace snore::io
