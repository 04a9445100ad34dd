#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "volgan/common.hpp"
#include "volgan/volume.hpp"

namespace volgan {

// Minimal NIfTI-1 support: uncompressed single-file .nii, 3-D (or 4-D with a
// single time point), datatypes uint8 / int16 / float32, with slope/intercept
// scaling and byte-swapped files handled. Everything else is rejected with an
// error naming the offending header field.

struct NiftiHeader {
  std::int32_t sizeof_hdr = 348;
  std::int16_t dim[8] = {0};
  std::int16_t datatype = 0;
  std::int16_t bitpix = 0;
  float vox_offset = 352.0f;
  float scl_slope = 1.0f;
  float scl_inter = 0.0f;
  char magic[4] = {'n', '+', '1', '\0'};
  bool swapped = false;  // header bytes were opposite-endian
};

namespace detail {

inline constexpr std::size_t kNiftiHeaderSize = 348;
inline constexpr std::size_t kNiftiMinFileSize = 352;

inline std::uint16_t swap16(std::uint16_t v) {
  return std::uint16_t((v >> 8) | (v << 8));
}
inline std::uint32_t swap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

inline std::int16_t read_i16(const std::uint8_t* p, bool swapped) {
  std::uint16_t v;
  std::memcpy(&v, p, 2);
  if (swapped) v = swap16(v);
  std::int16_t out;
  std::memcpy(&out, &v, 2);
  return out;
}

inline std::int32_t read_i32(const std::uint8_t* p, bool swapped) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  if (swapped) v = swap32(v);
  std::int32_t out;
  std::memcpy(&out, &v, 4);
  return out;
}

inline float read_f32(const std::uint8_t* p, bool swapped) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  if (swapped) v = swap32(v);
  float out;
  std::memcpy(&out, &v, 4);
  return out;
}

}  // namespace detail

inline NiftiHeader parse_nifti_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < detail::kNiftiMinFileSize) {
    throw NiftiError("sizeof_hdr", "file shorter than the 352-byte minimum (" +
                                       std::to_string(bytes.size()) +
                                       " bytes)");
  }
  const std::uint8_t* p = bytes.data();
  NiftiHeader h;
  std::int32_t raw_size = detail::read_i32(p, false);
  if (raw_size == 348) {
    h.swapped = false;
  } else if (detail::read_i32(p, true) == 348) {
    h.swapped = true;
  } else {
    throw NiftiError("sizeof_hdr",
                     "expected 348, got " + std::to_string(raw_size));
  }
  h.sizeof_hdr = 348;
  std::memcpy(h.magic, p + 344, 4);
  const bool magic_ok = (std::memcmp(h.magic, "n+1", 4) == 0) ||
                        (std::memcmp(h.magic, "ni1", 4) == 0);
  if (!magic_ok) {
    throw NiftiError("magic", std::string("expected \"n+1\" or \"ni1\", got \"") +
                                  std::string(h.magic, h.magic + 3) + "\"");
  }
  for (int i = 0; i < 8; ++i) h.dim[i] = detail::read_i16(p + 40 + 2 * i, h.swapped);
  h.datatype = detail::read_i16(p + 70, h.swapped);
  h.bitpix = detail::read_i16(p + 72, h.swapped);
  h.vox_offset = detail::read_f32(p + 108, h.swapped);
  h.scl_slope = detail::read_f32(p + 112, h.swapped);
  h.scl_inter = detail::read_f32(p + 116, h.swapped);

  if (h.dim[0] != 3 && h.dim[0] != 4) {
    throw NiftiError("dim", "dim[0] must be 3 or 4, got " +
                                std::to_string(h.dim[0]));
  }
  if (h.dim[0] == 4 && h.dim[4] != 1) {
    throw NiftiError("dim", "4-D files must have a single time point, got "
                            "dim[4]=" + std::to_string(h.dim[4]));
  }
  for (int i = 1; i <= 3; ++i) {
    if (h.dim[i] <= 0) {
      throw NiftiError("dim", "dim[" + std::to_string(i) + "] must be "
                              "positive, got " + std::to_string(h.dim[i]));
    }
  }
  if (h.datatype != 2 && h.datatype != 4 && h.datatype != 16) {
    throw NiftiError("datatype", "unsupported code " +
                                     std::to_string(h.datatype) +
                                     " (supported: uint8=2, int16=4, "
                                     "float32=16)");
  }
  const int expected_bitpix = h.datatype == 2 ? 8 : h.datatype == 4 ? 16 : 32;
  if (h.bitpix != expected_bitpix) {
    throw NiftiError("bitpix", "expected " + std::to_string(expected_bitpix) +
                                   " for datatype " +
                                   std::to_string(h.datatype) + ", got " +
                                   std::to_string(h.bitpix));
  }
  return h;
}

// Decodes header and voxel payload, applies slope/intercept scaling, and
// min-max normalizes intensities into [-1, 1].
inline Volume parse_nifti(std::span<const std::uint8_t> bytes) {
  const NiftiHeader h = parse_nifti_header(bytes);
  std::size_t offset = detail::kNiftiMinFileSize;
  if (h.vox_offset > float(detail::kNiftiMinFileSize) &&
      h.vox_offset == h.vox_offset) {
    offset = static_cast<std::size_t>(h.vox_offset);
  }
  Volume v;
  v.dims = {std::size_t(h.dim[1]), std::size_t(h.dim[2]),
            std::size_t(h.dim[3])};
  const std::size_t n = v.voxel_count();
  const std::size_t elem = std::size_t(h.bitpix) / 8;
  if (bytes.size() < offset + n * elem) {
    throw NiftiError("payload", "need " + std::to_string(offset + n * elem) +
                                    " bytes, file has " +
                                    std::to_string(bytes.size()));
  }
  const std::uint8_t* p = bytes.data() + offset;
  v.voxels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    float raw;
    switch (h.datatype) {
      case 2:
        raw = float(p[i]);
        break;
      case 4:
        raw = float(detail::read_i16(p + 2 * i, h.swapped));
        break;
      default:
        raw = detail::read_f32(p + 4 * i, h.swapped);
        break;
    }
    if (h.scl_slope != 0.0f) raw = raw * h.scl_slope + h.scl_inter;
    v.voxels[i] = raw;
  }
  normalize_intensities(v);
  return v;
}

inline Volume parse_nifti_file(const std::string& path) {
  std::ifstream
      is(path, std::ios::binary | std::ios::ate);
  if (!is) throw IoError("cannot open nifti file: " + path);
  const std::streamsize size = is.tellg();
  is.seekg(0);
  std::vector<std::uint8_t> bytes(std::size_t(size));
  is.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!is) throw IoError("failed reading nifti file: " + path);
  Volume v = parse_nifti(bytes);
  v.id = path;
  return v;
}

// Serializes as float32, slope 1, intercept 0, single-file "n+1" layout with
// the payload at byte 352.
inline std::vector<std::uint8_t> serialize_nifti(const Volume& v) {
  std::vector<std::uint8_t> out(detail::kNiftiMinFileSize +
                                    v.voxel_count() * 4,
                                0);
  auto put_i32 = [&](std::size_t off, std::int32_t value) {
    std::memcpy(out.data() + off, &value, 4);
  };
  auto put_i16 = [&](std::size_t off, std::int16_t value) {
    std::memcpy(out.data() + off, &value, 2);
  };
  auto put_f32 = [&](std::size_t off, float value) {
    std::memcpy(out.data() + off, &value, 4);
  };
  put_i32(0, 348);
  put_i16(40, 3);  // dim[0]
  put_i16(42, std::int16_t(v.dims[0]));
  put_i16(44, std::int16_t(v.dims[1]));
  put_i16(46, std::int16_t(v.dims[2]));
  for (std::size_t i = 4; i < 8; ++i) put_i16(40 + 2 * i, 1);
  put_i16(70, 16);  // float32
  put_i16(72, 32);  // bitpix
  put_f32(108, 352.0f);
  put_f32(112, 1.0f);  // scl_slope
  put_f32(116, 0.0f);  // scl_inter
  std::memcpy(out.data() + 344, "n+1\0", 4);
  std::memcpy(out.data() + detail::kNiftiMinFileSize, v.voxels.data(),
              v.voxel_count() * 4);
  return out;
}

inline void write_nifti_file(const std::string& path, const Volume& v) {
  const auto bytes = serialize_nifti(v);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open nifti file for writing: " + path);
  os.write(reinterpret_cast<const char*>(bytes.data()),
           std::streamsize(bytes.size()));
  if (!os) throw IoError("failed writing nifti file: " + path);
}

}  // namespace volgan
