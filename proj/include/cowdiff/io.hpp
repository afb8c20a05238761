#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cowdiff/tensor.hpp"
#include "cowdiff/tiny_denoiser.hpp"

namespace cowdiff {

/// Binary PGM (1 channel) or PPM (3 channels), 8 bits per sample, mapped
/// linearly [0, 255] <-> [-1, 1]. Values outside [-1, 1] are clamped on write.
Canvas read_pnm(std::istream& in);
void write_pnm(std::ostream& out, const Canvas& canvas);

/// Raw tensor: "CWTN", u32 version=1, u32 height width channels, then
/// little-endian float32 values in raster order.
Canvas read_tensor(std::istream& in);
void write_tensor(std::ostream& out, const Canvas& canvas);

/// Dispatch on extension: .pgm/.ppm/.pnm are 8-bit images, anything else is
/// the raw tensor format.
Canvas read_canvas(const std::string& path);
void write_canvas(const std::string& path, const Canvas& canvas);

/// Dataset manifest: one "label path" pair per line (label "-" = none), paths
/// relative to the manifest's directory, '#' comments allowed.
std::vector<LabeledImage> load_dataset(const std::string& manifest_path);
/// Writes every image as a raw tensor next to the manifest.
void save_dataset(const std::string& manifest_path, const std::vector<LabeledImage>& dataset);

/// Quantizes to the 8-bit grid used by write_pnm (for round-trip checks).
double quantize_8bit(double v);

}  // namespace cowdiff
