#ifndef MRFSEG_PGM_IO_HPP
#define MRFSEG_PGM_IO_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mrfseg/core.hpp"

// Raster persistence. Single-band data travels as PGM (ASCII P2 or binary P5,
// maxval up to 65535, two-byte samples big-endian above 255). Multiband data
// travels as a planar container: one ASCII line "MSI height width bands"
// followed by that many complete P5 payloads. Integer-valued data in range
// round-trips losslessly; anything else is quantized to 16 bits with the
// affine range recorded in a "# scale <min> <max>" header comment and undone
// on read. Label maps store their alphabet size as maxval = label_count - 1.

namespace mrfseg {

/// Malformed input; the offset is the byte position where parsing failed.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t offset);
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// File-system failure (open/short write); distinct from malformed content.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& message) : std::runtime_error(message) {}
};

void write_label_map(const std::string& path, const LabelMap& labels, bool ascii = false);
LabelMap read_label_map(const std::string& path);

/// Writes PGM for single-band images and the MSI container otherwise.
void write_image(const std::string& path, const MultiSpectralImage& image, bool ascii = false);
MultiSpectralImage read_image(const std::string& path);

/// Flat key=value manifest, one pair per line, in the given order.
void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& entries);
std::vector<std::pair<std::string, std::string>> read_manifest(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace mrfseg

#endif
