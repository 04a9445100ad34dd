#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "volgan/common.hpp"
#include "volgan/tensor.hpp"

namespace volgan {

enum class Label { bipolar, normal, unlabeled };
enum class Provenance { real, synthetic, generated };

inline const char* label_name(Label l) {
  switch (l) {
    case Label::bipolar: return "bipolar";
    case Label::normal: return "normal";
    case Label::unlabeled: return "unlabeled";
  }
  return "?";
}

inline Label label_from(const std::string& s) {
  if (s == "bipolar") return Label::bipolar;
  if (s == "normal") return Label::normal;
  if (s == "unlabeled") return Label::unlabeled;
  throw ContractError("unknown label: " + s);
}

inline const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::real: return "real";
    case Provenance::synthetic: return "synthetic";
    case Provenance::generated: return "generated";
  }
  return "?";
}

inline Provenance provenance_from(const std::string& s) {
  if (s == "real") return Provenance::real;
  if (s == "synthetic") return Provenance::synthetic;
  if (s == "generated") return Provenance::generated;
  throw ContractError("unknown provenance: " + s);
}

// One labeled 3-D scan. Voxels are stored row-major with the front axis
// fastest: index = (z * top + y) * front + x.
struct Volume {
  std::array<std::size_t, 3> dims{0, 0, 0};  // front, top, depth
  std::vector<float> voxels;
  Label label = Label::unlabeled;
  Provenance provenance = Provenance::real;
  std::pair<float, float> intensity_range{0.0f, 0.0f};
  std::string id;

  std::size_t front() const { return dims[0]; }
  std::size_t top() const { return dims[1]; }
  std::size_t depth() const { return dims[2]; }
  std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }

  float at(std::size_t x, std::size_t y, std::size_t z) const {
    return voxels[(z * dims[1] + y) * dims[0] + x];
  }
  float& at(std::size_t x, std::size_t y, std::size_t z) {
    return voxels[(z * dims[1] + y) * dims[0] + x];
  }
};

// Min-max normalization into [-1, 1]. A zero-range volume maps to -1
// everywhere; a volume that already spans exactly [-1, 1] is left untouched
// so that write/parse round-trips are bit-identical. Records the
// pre-normalization extrema in intensity_range.
inline void normalize_intensities(Volume& v) {
  if (v.voxels.empty()) throw ContractError("normalize: empty volume");
  float mn = v.voxels[0], mx = v.voxels[0];
  for (float x : v.voxels) {
    mn = std::min(mn, x);
    mx = std::max(mx, x);
  }
  v.intensity_range = {mn, mx};
  if (mx == mn) {
    std::fill(v.voxels.begin(), v.voxels.end(), -1.0f);
    return;
  }
  if (mn == -1.0f && mx == 1.0f) return;
  const float scale = 2.0f / (mx - mn);
  for (float& x : v.voxels) x = (x - mn) * scale - 1.0f;
}

// Non-overlapping factor^3 mean pooling. Every dim must be divisible by the
// factor; use crop_to_multiple / fit_depth first for awkward inputs.
inline Volume downsample_volume(const Volume& v, std::size_t factor = 4) {
  if (factor == 0) throw ContractError("downsample: factor must be positive");
  for (std::size_t d : v.dims) {
    if (d % factor != 0) {
      throw ShapeError("downsample: dims " + std::to_string(v.dims[0]) + "x" +
                       std::to_string(v.dims[1]) + "x" +
                       std::to_string(v.dims[2]) + " not divisible by " +
                       std::to_string(factor));
    }
  }
  Volume out;
  out.dims = {v.dims[0] / factor, v.dims[1] / factor, v.dims[2] / factor};
  out.voxels.resize(out.voxel_count());
  out.label = v.label;
  out.provenance = v.provenance;
  out.intensity_range = v.intensity_range;
  out.id = v.id;
  const float inv = 1.0f / float(factor * factor * factor);
  for (std::size_t z = 0; z < out.dims[2]; ++z) {
    for (std::size_t y = 0; y < out.dims[1]; ++y) {
      for (std::size_t x = 0; x < out.dims[0]; ++x) {
        float acc = 0.0f;
        for (std::size_t dz = 0; dz < factor; ++dz) {
          for (std::size_t dy = 0; dy < factor; ++dy) {
            for (std::size_t dx = 0; dx < factor; ++dx) {
              acc += v.at(x * factor + dx, y * factor + dy, z * factor + dz);
            }
          }
        }
        out.at(x, y, z) = acc * inv;
      }
    }
  }
  return out;
}

// Centered crop so each dim becomes a multiple of the factor.
inline Volume crop_to_multiple(const Volume& v, std::size_t factor) {
  std::array<std::size_t, 3> nd{};
  std::array<std::size_t, 3> off{};
  for (int i = 0; i < 3; ++i) {
    nd[i] = (v.dims[i] / factor) * factor;
    if (nd[i] == 0) {
      throw ShapeError("crop_to_multiple: dim smaller than factor");
    }
    off[i] = (v.dims[i] - nd[i]) / 2;
  }
  Volume out = v;
  out.dims = nd;
  out.voxels.assign(out.voxel_count(), 0.0f);
  for (std::size_t z = 0; z < nd[2]; ++z) {
    for (std::size_t y = 0; y < nd[1]; ++y) {
      for (std::size_t x = 0; x < nd[0]; ++x) {
        out.at(x, y, z) = v.at(x + off[0], y + off[1], z + off[2]);
      }
    }
  }
  return out;
}

// Center-pads (with background -1) or center-crops the depth axis to the
// target; handles 172-deep acquisitions against the 176-deep pipeline.
inline Volume fit_depth(const Volume& v, std::size_t target_depth) {
  if (v.depth() == target_depth) return v;
  Volume out = v;
  out.dims[2] = target_depth;
  out.voxels.assign(out.voxel_count(), -1.0f);
  if (v.depth() < target_depth) {
    const std::size_t off = (target_depth - v.depth()) / 2;
    for (std::size_t z = 0; z < v.depth(); ++z) {
      for (std::size_t y = 0; y < v.top(); ++y) {
        for (std::size_t x = 0; x < v.front(); ++x) {
          out.at(x, y, z + off) = v.at(x, y, z);
        }
      }
    }
  } else {
    const std::size_t off = (v.depth() - target_depth) / 2;
    for (std::size_t z = 0; z < target_depth; ++z) {
      for (std::size_t y = 0; y < v.top(); ++y) {
        for (std::size_t x = 0; x < v.front(); ++x) {
          out.at(x, y, z) = v.at(x, y, z + off);
        }
      }
    }
  }
  return out;
}

// Ordered band of 2-D depth slices; each slice is a row-major [height=top,
// width=front] grid.
struct SliceStack {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::vector<float>> slices;
  std::vector<int> depth_indices;
  Label label = Label::unlabeled;
  Provenance provenance = Provenance::real;
  std::string id;

  std::size_t count() const { return slices.size(); }
};

// Keeps the centered contiguous band of `count` depth slices; for depth 44
// and count 22 this selects indices 11..32.
inline SliceStack select_band(const Volume& v, std::size_t count = 22) {
  if (v.depth() < count) {
    throw ShapeError("select_band: volume depth " + std::to_string(v.depth()) +
                     " < band size " + std::to_string(count));
  }
  const std::size_t start = (v.depth() - count) / 2;
  SliceStack s;
  s.height = v.top();
  s.width = v.front();
  s.label = v.label;
  s.provenance = v.provenance;
  s.id = v.id;
  s.slices.reserve(count);
  s.depth_indices.reserve(count);
  for (std::size_t z = start; z < start + count; ++z) {
    std::vector<float> grid(s.height * s.width);
    for (std::size_t y = 0; y < s.height; ++y) {
      for (std::size_t x = 0; x < s.width; ++x) {
        grid[y * s.width + x] = v.at(x, y, z);
      }
    }
    s.slices.push_back(std::move(grid));
    s.depth_indices.push_back(int(z));
  }
  return s;
}

// Halves each slice with 2x2 mean pooling (64x64 -> 32x32). Slice count,
// label and provenance are preserved.
inline SliceStack resize_stack(const SliceStack& s) {
  if (s.height % 2 != 0 || s.width % 2 != 0 || s.height == 0 || s.width == 0) {
    throw ShapeError("resize_stack: slice dims " + std::to_string(s.height) +
                     "x" + std::to_string(s.width) + " must be even");
  }
  SliceStack out = s;
  out.height = s.height / 2;
  out.width = s.width / 2;
  out.slices.clear();
  for (const auto& grid : s.slices) {
    std::vector<float> small(out.height * out.width);
    for (std::size_t y = 0; y < out.height; ++y) {
      for (std::size_t x = 0; x < out.width; ++x) {
        small[y * out.width + x] =
            0.25f * (grid[(2 * y) * s.width + 2 * x] +
                     grid[(2 * y) * s.width + 2 * x + 1] +
                     grid[(2 * y + 1) * s.width + 2 * x] +
                     grid[(2 * y + 1) * s.width + 2 * x + 1]);
      }
    }
    out.slices.push_back(std::move(small));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Slice-stack files (tensor dump, rank 3: [count, height, width])
// ---------------------------------------------------------------------------

inline void save_stack(const std::string& path, const SliceStack& s) {
  std::vector<float> flat;
  flat.reserve(s.count() * s.height * s.width);
  for (const auto& grid : s.slices) {
    flat.insert(flat.end(), grid.begin(), grid.end());
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open stack for writing: " + path);
  write_tensor_dump(os, Tensor::from({s.count(), s.height, s.width},
                                     std::move(flat)));
  if (!os) throw IoError("failed writing stack: " + path);
}

inline SliceStack load_stack(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open stack: " + path);
  Tensor t = read_tensor_dump(is);
  if (t.rank() != 3) throw IoError("stack file must be rank 3: " + path);
  SliceStack s;
  s.height = t.dim(1);
  s.width = t.dim(2);
  const std::size_t n = t.dim(0);
  const std::size_t per = s.height * s.width;
  for (std::size_t i = 0; i < n; ++i) {
    s.slices.emplace_back(t.data().begin() + i * per,
                          t.data().begin() + (i + 1) * per);
    s.depth_indices.push_back(int(i));
  }
  return s;
}

// ---------------------------------------------------------------------------
// PGM export (binary P5, 8-bit), linear [-1,1] -> [0,255]
// ---------------------------------------------------------------------------

inline std::string render_pgm(const std::vector<float>& grid, std::size_t h,
                              std::size_t w) {
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) +
                    "\n255\n";
  out.reserve(out.size() + h * w);
  for (float v : grid) {
    const float clamped = std::min(1.0f, std::max(-1.0f, v));
    const int byte = int(std::lround((clamped + 1.0f) * 0.5f * 255.0f));
    out.push_back(static_cast<char>(byte));
  }
  return out;
}

inline void write_pgm(const std::string& path, const std::vector<float>& grid,
                      std::size_t h, std::size_t w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open pgm for writing: " + path);
  const std::string bytes = render_pgm(grid, h, w);
  os.write(bytes.data(), std::streamsize(bytes.size()));
  if (!os) throw IoError("failed writing pgm: " + path);
}

// ---------------------------------------------------------------------------
// Dataset manifest: one sample per line, tab-separated path, label,
// provenance.
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string path;
  Label label = Label::unlabeled;
  Provenance provenance = Provenance::real;
};

inline void write_manifest(const std::string& path,
                           const std::vector<ManifestEntry>& entries) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open manifest for writing: " + path);
  for (const auto& e : entries) {
    os << e.path << '\t' << label_name(e.label) << '\t'
       << provenance_name(e.provenance) << '\n';
  }
  if (!os) throw IoError("failed writing manifest: " + path);
}

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest: " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string p, l, prov;
    if (!std::getline(ss, p, '\t') || !std::getline(ss, l, '\t') ||
        !std::getline(ss, prov, '\t')) {
      throw IoError("malformed manifest line in " + path + ": " + line);
    }
    entries.push_back({p, label_from(l), provenance_from(prov)});
  }
  return entries;
}

// Sidecar split file: path TAB train|test per line.
inline void write_split(const std::string& path,
                        const std::vector<std::pair<std::string, bool>>&
                            path_is_test) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open split file for writing: " + path);
  for (const auto& [p, is_test] : path_is_test) {
    os << p << '\t' << (is_test ? "test" : "train") << '\n';
  }
}

inline std::vector<std::pair<std::string, bool>> read_split(
    const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open split file: " + path);
  std::vector<std::pair<std::string, bool>> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string p, which;
    if (!std::getline(ss, p, '\t') || !std::getline(ss, which, '\t')) {
      throw IoError("malformed split line in " + path + ": " + line);
    }
    if (which != "train" && which != "test") {
      throw IoError("split must be train or test in " + path + ": " + line);
    }
    out.emplace_back(p, which == "test");
  }
  return out;
}

}  // namespace volgan
