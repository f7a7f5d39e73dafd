#pragma once

#include <qcreg/errors.hpp>
#include <qcreg/mesh.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace qcreg {

///
/// Grayscale raster on the integer lattice: node (x, y) holds value(x, y) at
/// plane position (x, y), x in [0, width), y in [0, height). Off-lattice
/// evaluation is bilinear with border clamping; gradients use central
/// differences (one-sided on the border), interpolated bilinearly in between.
///
class IntensityField {
public:
    IntensityField() = default;

    IntensityField(int width, int height, double fill = 0.0)
        : m_width(width), m_height(height), m_data(static_cast<std::size_t>(width) * height, fill)
    {
        if (width < 1 || height < 1) throw InputError("raster dimensions must be positive");
    }

    IntensityField(int width, int height, std::vector<double> data)
        : m_width(width), m_height(height), m_data(std::move(data))
    {
        if (width < 1 || height < 1) throw InputError("raster dimensions must be positive");
        if (m_data.size() != static_cast<std::size_t>(width) * height)
            throw InputError("raster data does not match its dimensions");
    }

    int width() const { return m_width; }
    int height() const { return m_height; }
    std::size_t size() const { return m_data.size(); }
    const std::vector<double>& data() const { return m_data; }

    double& operator()(int x, int y) { return m_data[static_cast<std::size_t>(y) * m_width + x]; }
    double operator()(int x, int y) const { return m_data[static_cast<std::size_t>(y) * m_width + x]; }

    double sample(const Vec2& p) const
    {
        const auto [x0, y0, tx, ty] = cell(p);
        const int x1 = std::min(x0 + 1, m_width - 1), y1 = std::min(y0 + 1, m_height - 1);
        return (1 - ty) * ((1 - tx) * (*this)(x0, y0) + tx * (*this)(x1, y0)) +
               ty * ((1 - tx) * (*this)(x0, y1) + tx * (*this)(x1, y1));
    }

    /// Central-difference gradient at a lattice node.
    Vec2 node_gradient(int x, int y) const
    {
        auto diff = [](double lo, double hi, int span) { return span > 0 ? (hi - lo) / span : 0.0; };
        const int xl = std::max(x - 1, 0), xr = std::min(x + 1, m_width - 1);
        const int yl = std::max(y - 1, 0), yr = std::min(y + 1, m_height - 1);
        return {diff((*this)(xl, y), (*this)(xr, y), xr - xl), diff((*this)(x, yl), (*this)(x, yr), yr - yl)};
    }

    Vec2 gradient(const Vec2& p) const
    {
        const auto [x0, y0, tx, ty] = cell(p);
        const int x1 = std::min(x0 + 1, m_width - 1), y1 = std::min(y0 + 1, m_height - 1);
        return (1 - ty) * ((1 - tx) * node_gradient(x0, y0) + tx * node_gradient(x1, y0)) +
               ty * ((1 - tx) * node_gradient(x0, y1) + tx * node_gradient(x1, y1));
    }

    bool operator==(const IntensityField&) const = default;

private:
    struct Cell {
        int x0, y0;
        double tx, ty;
    };

    Cell cell(const Vec2& p) const
    {
        const double x = std::clamp(p.x(), 0.0, static_cast<double>(m_width - 1));
        const double y = std::clamp(p.y(), 0.0, static_cast<double>(m_height - 1));
        const int x0 = std::min(static_cast<int>(x), std::max(m_width - 2, 0));
        const int y0 = std::min(static_cast<int>(y), std::max(m_height - 2, 0));
        return {x0, y0, m_width > 1 ? x - x0 : 0.0, m_height > 1 ? y - y0 : 0.0};
    }

    int m_width = 0;
    int m_height = 0;
    std::vector<double> m_data;
};

/// Regular triangulation whose vertex j * width + i sits on raster node (i, j).
inline TriMesh make_image_mesh(int width, int height)
{
    return make_grid_mesh(width, height, 0.0, width - 1.0, 0.0, height - 1.0);
}

namespace detail {

inline std::string next_pnm_token(std::istream& is)
{
    std::string tok;
    int ch;
    while ((ch = is.get()) != EOF) {
        if (ch == '#') {
            while ((ch = is.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

} // namespace detail

/// Reads an ASCII (P2) or binary (P5) PGM; values are scaled to [0, 1] by maxval.
inline IntensityField read_pgm(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open image " + path);
    const std::string magic = detail::next_pnm_token(is);
    if (magic != "P2" && magic != "P5") throw InputError(path + ": not a P2/P5 PGM file");
    int width = 0, height = 0, maxval = 0;
    try {
        width = std::stoi(detail::next_pnm_token(is));
        height = std::stoi(detail::next_pnm_token(is));
        maxval = std::stoi(detail::next_pnm_token(is));
    } catch (const std::exception&) {
        throw InputError(path + ": malformed PGM header");
    }
    if (width < 1 || height < 1 || maxval < 1 || maxval > 65535) throw InputError(path + ": invalid PGM header");
    std::vector<double> data(static_cast<std::size_t>(width) * height);
    if (magic == "P2") {
        for (auto& v : data) {
            const std::string tok = detail::next_pnm_token(is);
            if (tok.empty()) throw InputError(path + ": truncated PGM data");
            v = std::stod(tok) / maxval;
        }
    } else {
        const int bytes = maxval < 256 ? 1 : 2;
        std::vector<unsigned char> raw(data.size() * bytes);
        is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (is.gcount() != static_cast<std::streamsize>(raw.size())) throw InputError(path + ": truncated PGM data");
        for (std::size_t i = 0; i < data.size(); ++i) {
            const unsigned value = bytes == 1 ? raw[i] : (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1];
            data[i] = static_cast<double>(value) / maxval;
        }
    }
    for (auto& v : data) v = std::clamp(v, 0.0, 1.0);
    return IntensityField(width, height, std::move(data));
}

/// Writes a binary PGM; values are clamped to [0, 1] and quantized to maxval levels.
inline void write_pgm(const std::string& path, const IntensityField& img, int maxval = 255)
{
    if (maxval < 1 || maxval > 65535) throw InputError("PGM maxval must be in [1, 65535]");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot write image " + path);
    os << "P5\n" << img.width() << ' ' << img.height() << '\n' << maxval << '\n';
    for (double v : img.data()) {
        const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
        if (maxval < 256) {
            os.put(static_cast<char>(q));
        } else {
            os.put(static_cast<char>(q >> 8));
            os.put(static_cast<char>(q & 0xff));
        }
    }
}

} // namespace qcreg
