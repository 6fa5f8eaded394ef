#include "trav/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "trav/error.hpp"

namespace trav {

namespace {

unsigned char to_byte(double v) {
    const double x = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(x * 255.0));
}

// Reads one whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    while (c != EOF && !std::isspace(c) && c != '#') {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    if (c != EOF) {
        in.unget();  // leave the delimiter in the stream
    }
    return tok;
}

int parse_pnm_int(std::istream& in, const char* what) {
    const std::string tok = next_token(in);
    if (tok.empty()) {
        throw FormatError(std::string("read_ppm: missing ") + what);
    }
    try {
        return std::stoi(tok);
    } catch (const std::exception&) {
        throw FormatError(std::string("read_ppm: bad ") + what + " \"" + tok + "\"");
    }
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
    require_same_shape(image.r, image.g, "write_ppm");
    require_same_shape(image.r, image.b, "write_ppm");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("write_ppm: cannot open " + path.string() + " for writing");
    }
    out << "P6\n" << image.r.width() << " " << image.r.height() << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(image.r.width()) * 3);
    for (int v = 0; v < image.r.height(); ++v) {
        for (int u = 0; u < image.r.width(); ++u) {
            row[static_cast<std::size_t>(u) * 3 + 0] = to_byte(image.r.at(v, u));
            row[static_cast<std::size_t>(u) * 3 + 1] = to_byte(image.g.at(v, u));
            row[static_cast<std::size_t>(u) * 3 + 2] = to_byte(image.b.at(v, u));
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) {
        throw IoError("write_ppm: write failed for " + path.string());
    }
}

RgbImage read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("read_ppm: cannot open " + path.string());
    }
    const std::string magic = next_token(in);
    if (magic != "P6") {
        throw FormatError("read_ppm: not a binary PPM (magic \"" + magic + "\")");
    }
    const int width = parse_pnm_int(in, "width");
    const int height = parse_pnm_int(in, "height");
    const int maxval = parse_pnm_int(in, "maxval");
    if (width < 1 || height < 1) {
        throw FormatError("read_ppm: non-positive dimensions");
    }
    if (maxval != 255) {
        throw FormatError("read_ppm: unsupported maxval " + std::to_string(maxval));
    }
    in.get();  // single whitespace byte after maxval
    const std::size_t count = static_cast<std::size_t>(width) * height;
    std::vector<unsigned char> bytes(count * 3);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
        throw FormatError("read_ppm: truncated pixel data");
    }
    std::vector<double> r(count);
    std::vector<double> g(count);
    std::vector<double> b(count);
    for (std::size_t i = 0; i < count; ++i) {
        r[i] = bytes[i * 3 + 0] / 255.0;
        g[i] = bytes[i * 3 + 1] / 255.0;
        b[i] = bytes[i * 3 + 2] / 255.0;
    }
    return RgbImage{DenseMap::from_values(height, width, std::move(r)),
                    DenseMap::from_values(height, width, std::move(g)),
                    DenseMap::from_values(height, width, std::move(b))};
}

void write_pgm(const std::filesystem::path& path, const UnitIntervalMap& map) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("write_pgm: cannot open " + path.string() + " for writing");
    }
    out << "P5\n" << map.width() << " " << map.height() << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(map.width()));
    for (int v = 0; v < map.height(); ++v) {
        for (int u = 0; u < map.width(); ++u) {
            row[static_cast<std::size_t>(u)] = to_byte(map.at(v, u));
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) {
        throw IoError("write_pgm: write failed for " + path.string());
    }
}

}  // namespace trav
