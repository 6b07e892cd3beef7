#include "mrfseg/pgm_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace mrfseg {

ParseError::ParseError(const std::string& message, std::size_t offset)
    : std::runtime_error(message + " (byte " + std::to_string(offset) + ")"),
      offset_(offset) {}

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("read failure: " + path);
    return std::move(buf).str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failure: " + path);
}

struct Cursor {
    const std::string& data;
    std::size_t pos = 0;

    bool eof() const { return pos >= data.size(); }
    char peek() const { return data[pos]; }
};

bool is_pgm_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

/// Skips whitespace and '#' comments; returns the last scale comment seen.
void skip_separators(Cursor& cur, std::string* scale_comment) {
    while (!cur.eof()) {
        if (is_pgm_space(cur.peek())) {
            ++cur.pos;
        } else if (cur.peek() == '#') {
            const std::size_t start = cur.pos;
            while (!cur.eof() && cur.peek() != '\n') ++cur.pos;
            if (scale_comment) {
                const std::string line = cur.data.substr(start, cur.pos - start);
                if (line.rfind("# scale ", 0) == 0) *scale_comment = line;
            }
        } else {
            return;
        }
    }
}

long parse_number(Cursor& cur, const char* what, std::string* scale_comment) {
    skip_separators(cur, scale_comment);
    if (cur.eof())
        throw ParseError(std::string("unexpected end of header, expected ") + what, cur.pos);
    if (cur.peek() < '0' || cur.peek() > '9')
        throw ParseError(std::string("expected digit for ") + what, cur.pos);
    long value = 0;
    while (!cur.eof() && cur.peek() >= '0' && cur.peek() <= '9') {
        value = value * 10 + (cur.peek() - '0');
        if (value > 1000000000L) throw ParseError(std::string(what) + " out of range", cur.pos);
        ++cur.pos;
    }
    return value;
}

struct PgmPayload {
    int width = 0;
    int height = 0;
    long maxval = 0;
    bool has_scale = false;
    double scale_min = 0.0;
    double scale_max = 0.0;
    std::vector<long> samples;  // row-major
};

PgmPayload parse_pgm(Cursor& cur) {
    skip_separators(cur, nullptr);
    if (cur.data.size() - cur.pos < 2 || cur.data[cur.pos] != 'P' ||
        (cur.data[cur.pos + 1] != '2' && cur.data[cur.pos + 1] != '5'))
        throw ParseError("expected PGM magic P2 or P5", cur.pos);
    const bool binary = cur.data[cur.pos + 1] == '5';
    cur.pos += 2;

    std::string scale_comment;
    PgmPayload out;
    out.width = static_cast<int>(parse_number(cur, "width", &scale_comment));
    out.height = static_cast<int>(parse_number(cur, "height", &scale_comment));
    out.maxval = parse_number(cur, "maxval", &scale_comment);
    if (out.width < 1 || out.height < 1)
        throw ParseError("dimensions must be positive", cur.pos);
    if (out.maxval < 1 || out.maxval > 65535)
        throw ParseError("maxval must lie in [1, 65535]", cur.pos);
    if (!scale_comment.empty()) {
        double lo = 0.0, hi = 0.0;
        if (std::sscanf(scale_comment.c_str(), "# scale %lf %lf", &lo, &hi) == 2 && hi > lo) {
            out.has_scale = true;
            out.scale_min = lo;
            out.scale_max = hi;
        }
    }

    const std::size_t count =
        static_cast<std::size_t>(out.width) * static_cast<std::size_t>(out.height);
    out.samples.resize(count);
    if (binary) {
        if (cur.eof() || !is_pgm_space(cur.peek()))
            throw ParseError("expected single whitespace before binary samples", cur.pos);
        ++cur.pos;
        const int bytes_per = out.maxval > 255 ? 2 : 1;
        const std::size_t need = count * bytes_per;
        const std::size_t have = cur.data.size() - cur.pos;
        if (have < need)
            throw ParseError("truncated pixel payload: expected " + std::to_string(need) +
                                 " bytes, found " + std::to_string(have),
                             cur.pos);
        const unsigned char* raw =
            reinterpret_cast<const unsigned char*>(cur.data.data() + cur.pos);
        for (std::size_t i = 0; i < count; ++i) {
            long v = bytes_per == 2 ? (static_cast<long>(raw[2 * i]) << 8) | raw[2 * i + 1]
                                    : raw[i];
            if (v > out.maxval)
                throw ParseError("sample exceeds maxval", cur.pos + i * bytes_per);
            out.samples[i] = v;
        }
        cur.pos += need;
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            const long v = parse_number(cur, "sample", nullptr);
            if (v > out.maxval) throw ParseError("sample exceeds maxval", cur.pos);
            out.samples[i] = v;
        }
    }
    return out;
}

void append_pgm(std::string& out, int width, int height, long maxval,
                const std::string& scale_comment, const std::vector<long>& samples,
                bool ascii) {
    out += ascii ? "P2\n" : "P5\n";
    if (!scale_comment.empty()) out += scale_comment + "\n";
    out += std::to_string(width) + " " + std::to_string(height) + "\n";
    out += std::to_string(maxval) + "\n";
    if (ascii) {
        int line_len = 0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const std::string tok = std::to_string(samples[i]);
            if (line_len > 0 && line_len + 1 + static_cast<int>(tok.size()) > 70) {
                out += '\n';
                line_len = 0;
            }
            if (line_len > 0) {
                out += ' ';
                ++line_len;
            }
            out += tok;
            line_len += static_cast<int>(tok.size());
        }
        out += '\n';
    } else if (maxval > 255) {
        for (long v : samples) {
            out += static_cast<char>((v >> 8) & 0xFF);
            out += static_cast<char>(v & 0xFF);
        }
    } else {
        for (long v : samples) out += static_cast<char>(v & 0xFF);
    }
}

struct BandEncoding {
    long maxval = 1;
    std::string scale_comment;
    std::vector<long> samples;
};

/// Integer data in [0, 65535] passes through; anything else maps affinely
/// onto [0, 65535] with the range recorded for exact inversion on read.
BandEncoding encode_band(const MultiSpectralImage& image, int band) {
    BandEncoding enc;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    bool integral = true;
    for (int r = 0; r < image.height(); ++r)
        for (int c = 0; c < image.width(); ++c) {
            const double v = image.value(r, c, band);
            if (!std::isfinite(v)) throw std::domain_error("write_image: non-finite value");
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            if (v != std::floor(v)) integral = false;
        }
    enc.samples.reserve(static_cast<std::size_t>(image.pixel_count()));
    if (integral && lo >= 0.0 && hi <= 65535.0) {
        enc.maxval = std::max(1L, static_cast<long>(hi));
        for (int r = 0; r < image.height(); ++r)
            for (int c = 0; c < image.width(); ++c)
                enc.samples.push_back(static_cast<long>(image.value(r, c, band)));
        return enc;
    }
    if (!(hi > lo)) hi = lo + 1.0;
    enc.maxval = 65535;
    char comment[96];
    std::snprintf(comment, sizeof(comment), "# scale %.17g %.17g", lo, hi);
    enc.scale_comment = comment;
    const double s = 65535.0 / (hi - lo);
    for (int r = 0; r < image.height(); ++r)
        for (int c = 0; c < image.width(); ++c) {
            const double v = (image.value(r, c, band) - lo) * s;
            enc.samples.push_back(
                std::clamp(static_cast<long>(std::nearbyint(v)), 0L, 65535L));
        }
    return enc;
}

}  // namespace

void write_label_map(const std::string& path, const LabelMap& labels, bool ascii) {
    std::vector<long> samples;
    samples.reserve(static_cast<std::size_t>(labels.pixel_count()));
    for (int v : labels.raw()) samples.push_back(v);
    std::string out;
    append_pgm(out, labels.width(), labels.height(), std::max(1, labels.label_count() - 1), "",
               samples, ascii);
    write_file(path, out);
}

LabelMap read_label_map(const std::string& path) {
    const std::string data = read_file(path);
    Cursor cur{data};
    const PgmPayload pgm = parse_pgm(cur);
    if (pgm.has_scale)
        throw ParseError("label raster must not carry a quantization scale", 0);
    std::vector<int> labels(pgm.samples.begin(), pgm.samples.end());
    return LabelMap(pgm.height, pgm.width, static_cast<int>(pgm.maxval) + 1,
                    std::move(labels));
}

void write_image(const std::string& path, const MultiSpectralImage& image, bool ascii) {
    std::string out;
    if (image.bands() == 1) {
        const BandEncoding enc = encode_band(image, 0);
        append_pgm(out, image.width(), image.height(), enc.maxval, enc.scale_comment,
                   enc.samples, ascii);
    } else {
        out = "MSI " + std::to_string(image.height()) + " " + std::to_string(image.width()) +
              " " + std::to_string(image.bands()) + "\n";
        for (int b = 0; b < image.bands(); ++b) {
            const BandEncoding enc = encode_band(image, b);
            append_pgm(out, image.width(), image.height(), enc.maxval, enc.scale_comment,
                       enc.samples, false);
        }
    }
    write_file(path, out);
}

namespace {

MultiSpectralImage decode_band_into(const PgmPayload& pgm, MultiSpectralImage image, int band) {
    const double span = pgm.scale_max - pgm.scale_min;
    std::size_t i = 0;
    for (int r = 0; r < pgm.height; ++r)
        for (int c = 0; c < pgm.width; ++c, ++i) {
            double v = static_cast<double>(pgm.samples[i]);
            if (pgm.has_scale) v = pgm.scale_min + v / 65535.0 * span;
            image.set_value(r, c, band, v);
        }
    return image;
}

}  // namespace

MultiSpectralImage read_image(const std::string& path) {
    const std::string data = read_file(path);
    Cursor cur{data};
    skip_separators(cur, nullptr);
    if (data.size() - cur.pos >= 4 && data.compare(cur.pos, 4, "MSI ") == 0) {
        cur.pos += 4;
        const int height = static_cast<int>(parse_number(cur, "height", nullptr));
        const int width = static_cast<int>(parse_number(cur, "width", nullptr));
        const int bands = static_cast<int>(parse_number(cur, "bands", nullptr));
        if (height < 1 || width < 1 || bands < 1)
            throw ParseError("container dimensions must be positive", cur.pos);
        MultiSpectralImage image(height, width, bands);
        for (int b = 0; b < bands; ++b) {
            const PgmPayload pgm = parse_pgm(cur);
            if (pgm.height != height || pgm.width != width)
                throw ParseError("band " + std::to_string(b) +
                                     " dimensions disagree with container",
                                 cur.pos);
            image = decode_band_into(pgm, std::move(image), b);
        }
        return image;
    }
    const PgmPayload pgm = parse_pgm(cur);
    MultiSpectralImage image(pgm.height, pgm.width, 1);
    return decode_band_into(pgm, std::move(image), 0);
}

void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
    std::string out;
    for (const auto& [key, value] : entries) out += key + "=" + value + "\n";
    write_file(path, out);
}

std::vector<std::pair<std::string, std::string>> read_manifest(const std::string& path) {
    const std::string data = read_file(path);
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(data);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("manifest line without '='", 0);
        out.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    write_file(path, content);
}

}  // namespace mrfseg
