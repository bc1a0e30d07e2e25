#pragma once

#include <string>
#include <vector>

#include "stylemix/rng.hpp"
#include "stylemix/tensor.hpp"

namespace stylemix {

// One procedural domain: a shape family plus style-factor bands. Domains must
// be separable, so across any two specs at least one band pair is disjoint.
struct SyntheticDomainSpec {
  enum class Shape { Ellipse, Rectangle, Triangle };
  int domain = 0;
  Shape shape = Shape::Ellipse;
  float hue_min = 0.0f, hue_max = 0.1f;        // hue band, fraction of the color wheel
  float freq_min = 1.0f, freq_max = 2.0f;      // texture cycles across the image
  float stroke_min = 1.0f, stroke_max = 2.0f;  // outline width in pixels
};

// Content factors are drawn from the same distributions for every domain;
// style factors come from the domain's bands.
struct SyntheticFactors {
  float cx, cy;      // center, fraction of image size
  float scale;       // half-extent, fraction of image size
  float rotation;    // radians
  float tex_angle;   // texture direction, radians
  float hue, freq, stroke;
};

// Throws if some pair of specs overlaps on every style factor.
void validate_domain_specs(const std::vector<SyntheticDomainSpec>& specs);

std::vector<SyntheticDomainSpec> default_synthetic_specs(int num_domains);

SyntheticFactors sample_factors(const SyntheticDomainSpec& spec, Rng& rng);

// Renders one (3, size, size) image in [-1, 1].
Tensor render_synthetic_image(const SyntheticDomainSpec& spec, const SyntheticFactors& f,
                              int size);

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  int label = 0;
  std::string split;  // "train" or "test"
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  int num_domains = 0;
  void validate() const;  // labels < m, no path in both splits
};

// Writes PNGs under out_dir/domain<k>/ and a manifest.tsv next to them.
DatasetManifest generate_synthetic(const std::vector<SyntheticDomainSpec>& specs,
                                   int train_per_domain, int test_per_domain, int size,
                                   uint64_t seed, const std::string& out_dir);

// Directory-per-domain layout; labels follow sorted subdirectory names. All
// entries land in the train split. Unreadable files are skipped with a
// warning; more than 5% skipped is an error.
DatasetManifest load_folder_dataset(const std::string& root);

void write_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

struct SplitData {
  Tensor images;  // (N, 3, size, size) in [-1, 1]
  std::vector<int> labels;
};

SplitData load_split(const DatasetManifest& m, const std::string& base_dir,
                     const std::string& split, int size);

// Per-image independent horizontal flip (p = 0.5) and random crop of scale
// [0.8, 1.0] resized back; shape preserved.
Tensor augment(const Tensor& batch, Rng& rng);

Tensor hflip(const Tensor& batch);
Tensor resize_bilinear(const Tensor& batch, int out_h, int out_w);

// PNG round trip; values map through 2*pixel/255 - 1.
void save_image(const Tensor& img, const std::string& path);
Tensor load_image(const std::string& path, int resize_to = 0);

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b);

}  // namespace stylemix
