#include "stylemix/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace stylemix {

namespace {

bool bands_disjoint(float a_lo, float a_hi, float b_lo, float b_hi) {
  return a_hi < b_lo || b_hi < a_lo;
}

struct Geometry {
  bool inside;
  float boundary_dist;  // unsigned distance to the shape outline, pixels
};

Geometry eval_shape(SyntheticDomainSpec::Shape shape, float u, float v, float a, float b) {
  Geometry g{};
  switch (shape) {
    case SyntheticDomainSpec::Shape::Ellipse: {
      const float q = std::sqrt((u / a) * (u / a) + (v / b) * (v / b));
      g.inside = q <= 1.0f;
      g.boundary_dist = std::abs(q - 1.0f) * std::min(a, b);
      break;
    }
    case SyntheticDomainSpec::Shape::Rectangle: {
      const float du = std::abs(u) - a, dv = std::abs(v) - b;
      g.inside = du <= 0.0f && dv <= 0.0f;
      g.boundary_dist = g.inside ? -std::max(du, dv)
                                 : std::hypot(std::max(du, 0.0f), std::max(dv, 0.0f));
      break;
    }
    case SyntheticDomainSpec::Shape::Triangle: {
      // equilateral triangle of circumradius a
      float vx[3], vy[3];
      for (int k = 0; k < 3; ++k) {
        const float ang = static_cast<float>(-M_PI / 2 + 2.0 * M_PI * k / 3.0);
        vx[k] = a * std::cos(ang);
        vy[k] = a * std::sin(ang);
      }
      bool pos = false, neg = false;
      float mind = 1e30f;
      for (int k = 0; k < 3; ++k) {
        const int k2 = (k + 1) % 3;
        const float ex = vx[k2] - vx[k], ey = vy[k2] - vy[k];
        const float px = u - vx[k], py = v - vy[k];
        const float cross = ex * py - ey * px;
        (cross >= 0.0f ? pos : neg) = true;
        const float len2 = ex * ex + ey * ey;
        const float t = std::clamp((px * ex + py * ey) / len2, 0.0f, 1.0f);
        mind = std::min(mind, std::hypot(px - t * ex, py - t * ey));
      }
      g.inside = !(pos && neg);
      g.boundary_dist = mind;
      break;
    }
  }
  return g;
}

cv::Mat tensor_to_mat(const Tensor& img) {
  const int c = img.dim(img.ndim() - 3), h = img.dim(img.ndim() - 2), w = img.dim(img.ndim() - 1);
  if (c != 3) throw std::invalid_argument("save_image: 3-channel image expected");
  cv::Mat mat(h, w, CV_8UC3);
  const float* r = img.data();
  const float* g = r + static_cast<int64_t>(h) * w;
  const float* b = g + static_cast<int64_t>(h) * w;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int64_t i = static_cast<int64_t>(y) * w + x;
      auto to8 = [](float v) {
        const float p = std::clamp((v + 1.0f) * 0.5f, 0.0f, 1.0f) * 255.0f;
        return static_cast<unsigned char>(std::lround(p));
      };
      mat.at<cv::Vec3b>(y, x) = cv::Vec3b(to8(b[i]), to8(g[i]), to8(r[i]));  // BGR
    }
  return mat;
}

Tensor mat_to_tensor(const cv::Mat& mat) {
  const int h = mat.rows, w = mat.cols;
  Tensor out({1, 3, h, w});
  float* r = out.data();
  float* g = r + static_cast<int64_t>(h) * w;
  float* b = g + static_cast<int64_t>(h) * w;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const cv::Vec3b px = mat.at<cv::Vec3b>(y, x);
      const int64_t i = static_cast<int64_t>(y) * w + x;
      b[i] = 2.0f * px[0] / 255.0f - 1.0f;
      g[i] = 2.0f * px[1] / 255.0f - 1.0f;
      r[i] = 2.0f * px[2] / 255.0f - 1.0f;
    }
  return out;
}

}  // namespace

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
  h = h - std::floor(h);
  const float h6 = h * 6.0f;
  const int sector = std::min(static_cast<int>(h6), 5);
  const float f = h6 - sector;
  const float p = v * (1.0f - s);
  const float q = v * (1.0f - s * f);
  const float t = v * (1.0f - s * (1.0f - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

void validate_domain_specs(const std::vector<SyntheticDomainSpec>& specs) {
  if (specs.size() < 2) throw std::invalid_argument("domain specs: at least 2 domains required");
  for (const auto& s : specs) {
    if (s.hue_min > s.hue_max || s.freq_min > s.freq_max || s.stroke_min > s.stroke_max)
      throw std::invalid_argument("domain specs: inverted style band");
  }
  for (size_t i = 0; i < specs.size(); ++i)
    for (size_t j = i + 1; j < specs.size(); ++j) {
      const auto& a = specs[i];
      const auto& b = specs[j];
      const bool sep = bands_disjoint(a.hue_min, a.hue_max, b.hue_min, b.hue_max) ||
                       bands_disjoint(a.freq_min, a.freq_max, b.freq_min, b.freq_max) ||
                       bands_disjoint(a.stroke_min, a.stroke_max, b.stroke_min, b.stroke_max);
      if (!sep)
        throw std::invalid_argument("domain specs: domains " + std::to_string(a.domain) + " and " +
                                    std::to_string(b.domain) +
                                    " overlap on every style factor");
    }
}

std::vector<SyntheticDomainSpec> default_synthetic_specs(int num_domains) {
  if (num_domains < 2) throw std::invalid_argument("default_synthetic_specs: need >= 2 domains");
  std::vector<SyntheticDomainSpec> specs(static_cast<size_t>(num_domains));
  const SyntheticDomainSpec::Shape shapes[3] = {SyntheticDomainSpec::Shape::Ellipse,
                                                SyntheticDomainSpec::Shape::Rectangle,
                                                SyntheticDomainSpec::Shape::Triangle};
  // hue bands tile the wheel with gaps, so any pair is hue-disjoint
  const float slot = 1.0f / num_domains;
  for (int d = 0; d < num_domains; ++d) {
    auto& s = specs[static_cast<size_t>(d)];
    s.domain = d;
    s.shape = shapes[d % 3];
    s.hue_min = d * slot;
    s.hue_max = d * slot + 0.6f * slot;
    s.freq_min = 1.0f + 2.0f * d;
    s.freq_max = 2.5f + 2.0f * d;
    s.stroke_min = 1.0f + 0.5f * d;
    s.stroke_max = 1.4f + 0.5f * d;
  }
  return specs;
}

SyntheticFactors sample_factors(const SyntheticDomainSpec& spec, Rng& rng) {
  SyntheticFactors f{};
  f.cx = static_cast<float>(rng.uniform(0.35, 0.65));
  f.cy = static_cast<float>(rng.uniform(0.35, 0.65));
  f.scale = static_cast<float>(rng.uniform(0.18, 0.32));
  f.rotation = static_cast<float>(rng.uniform(0.0, 2.0 * M_PI));
  f.tex_angle = static_cast<float>(rng.uniform(0.0, 2.0 * M_PI));
  f.hue = static_cast<float>(rng.uniform(spec.hue_min, spec.hue_max));
  f.freq = static_cast<float>(rng.uniform(spec.freq_min, spec.freq_max));
  f.stroke = static_cast<float>(rng.uniform(spec.stroke_min, spec.stroke_max));
  return f;
}

Tensor render_synthetic_image(const SyntheticDomainSpec& spec, const SyntheticFactors& f,
                              int size) {
  if (size < 8) throw std::invalid_argument("render_synthetic_image: size too small");
  Tensor img({3, size, size});
  float fr, fg, fb;
  hsv_to_rgb(f.hue, 0.8f, 0.9f, fr, fg, fb);
  const float a = f.scale * size;
  const float b = spec.shape == SyntheticDomainSpec::Shape::Rectangle ? 0.65f * a : 0.7f * a;
  const float cr = std::cos(f.rotation), sr = std::sin(f.rotation);
  const float tx = std::cos(f.tex_angle), ty = std::sin(f.tex_angle);
  float* pr = img.data();
  float* pg = pr + static_cast<int64_t>(size) * size;
  float* pb = pg + static_cast<int64_t>(size) * size;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const float px = x + 0.5f - f.cx * size;
      const float py = y + 0.5f - f.cy * size;
      const float u = cr * px + sr * py;
      const float v = -sr * px + cr * py;
      const Geometry geo = eval_shape(spec.shape, u, v, a, b);
      float r, g, bl;
      if (geo.boundary_dist < f.stroke) {
        r = g = bl = 0.12f;  // dark outline straddling the boundary
      } else if (geo.inside) {
        // style texture: sinusoidal value modulation inside the shape
        const float phase =
            2.0f * static_cast<float>(M_PI) * f.freq * (tx * px + ty * py) / size;
        const float mod = 1.0f + 0.25f * std::sin(phase);
        r = std::clamp(fr * mod, 0.0f, 1.0f);
        g = std::clamp(fg * mod, 0.0f, 1.0f);
        bl = std::clamp(fb * mod, 0.0f, 1.0f);
      } else {
        r = g = bl = 0.55f;  // flat background, content-free
      }
      const int64_t i = static_cast<int64_t>(y) * size + x;
      pr[i] = 2.0f * r - 1.0f;
      pg[i] = 2.0f * g - 1.0f;
      pb[i] = 2.0f * bl - 1.0f;
    }
  return img;
}

void DatasetManifest::validate() const {
  std::map<std::string, std::string> split_of;
  for (const auto& e : entries) {
    if (e.label < 0 || e.label >= num_domains)
      throw std::invalid_argument("manifest: label " + std::to_string(e.label) +
                                  " out of range for m=" + std::to_string(num_domains));
    if (e.split != "train" && e.split != "test")
      throw std::invalid_argument("manifest: unknown split '" + e.split + "'");
    auto it = split_of.find(e.path);
    if (it != split_of.end() && it->second != e.split)
      throw std::invalid_argument("manifest: " + e.path + " appears in both splits");
    split_of.emplace(e.path, e.split);
  }
}

DatasetManifest generate_synthetic(const std::vector<SyntheticDomainSpec>& specs,
                                   int train_per_domain, int test_per_domain, int size,
                                   uint64_t seed, const std::string& out_dir) {
  validate_domain_specs(specs);
  if (train_per_domain < 1 || test_per_domain < 0)
    throw std::invalid_argument("generate_synthetic: counts must be positive");
  DatasetManifest manifest;
  manifest.num_domains = static_cast<int>(specs.size());
  Rng master(seed);
  for (const auto& spec : specs) {
    const std::string dir = "domain" + std::to_string(spec.domain);
    fs::create_directories(fs::path(out_dir) / dir);
    Rng domain_rng = master.split();
    const int total = train_per_domain + test_per_domain;
    for (int i = 0; i < total; ++i) {
      const SyntheticFactors f = sample_factors(spec, domain_rng);
      const Tensor img = render_synthetic_image(spec, f, size);
      char name[64];
      std::snprintf(name, sizeof(name), "%s/%05d.png", dir.c_str(), i);
      save_image(img, (fs::path(out_dir) / name).string());
      manifest.entries.push_back(
          {name, spec.domain, i < train_per_domain ? "train" : "test"});
    }
  }
  manifest.validate();
  write_manifest(manifest, (fs::path(out_dir) / "manifest.tsv").string());
  return manifest;
}

DatasetManifest load_folder_dataset(const std::string& root) {
  if (!fs::is_directory(root))
    throw std::invalid_argument("load_folder_dataset: " + root + " is not a directory");
  std::vector<std::string> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path().filename().string());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.size() < 2)
    throw std::invalid_argument("load_folder_dataset: need >= 2 domain subdirectories");
  DatasetManifest manifest;
  manifest.num_domains = static_cast<int>(dirs.size());
  int total = 0, skipped = 0;
  for (size_t d = 0; d < dirs.size(); ++d) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(fs::path(root) / dirs[d]))
      if (e.is_regular_file()) files.push_back(e.path().filename().string());
    std::sort(files.begin(), files.end());
    if (files.empty())
      throw std::invalid_argument("load_folder_dataset: empty domain directory " + dirs[d]);
    for (const auto& file : files) {
      ++total;
      const std::string rel = dirs[d] + "/" + file;
      cv::Mat m = cv::imread((fs::path(root) / rel).string(), cv::IMREAD_COLOR);
      if (m.empty()) {
        std::fprintf(stderr, "load_folder_dataset: skipping unreadable %s\n", rel.c_str());
        ++skipped;
        continue;
      }
      manifest.entries.push_back({rel, static_cast<int>(d), "train"});
    }
  }
  if (skipped * 20 > total)
    throw std::runtime_error("load_folder_dataset: more than 5% of files unreadable");
  manifest.validate();
  return manifest;
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_manifest: cannot open " + path);
  for (const auto& e : m.entries) out << e.path << '\t' << e.label << '\t' << e.split << '\n';
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_manifest: cannot open " + path);
  DatasetManifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    ManifestEntry e;
    std::string label_str;
    if (!std::getline(ss, e.path, '\t') || !std::getline(ss, label_str, '\t') ||
        !std::getline(ss, e.split))
      throw std::runtime_error("read_manifest: malformed line " + std::to_string(lineno));
    e.label = std::stoi(label_str);
    m.num_domains = std::max(m.num_domains, e.label + 1);
    m.entries.push_back(std::move(e));
  }
  m.validate();
  return m;
}

SplitData load_split(const DatasetManifest& m, const std::string& base_dir,
                     const std::string& split, int size) {
  std::vector<const ManifestEntry*> sel;
  for (const auto& e : m.entries)
    if (e.split == split) sel.push_back(&e);
  if (sel.empty()) throw std::invalid_argument("load_split: no entries in split '" + split + "'");
  SplitData out;
  out.images = Tensor({static_cast<int>(sel.size()), 3, size, size});
  const int64_t sz = 3LL * size * size;
  for (size_t i = 0; i < sel.size(); ++i) {
    Tensor img = load_image((fs::path(base_dir) / sel[i]->path).string(), size);
    std::copy(img.data(), img.data() + sz, out.images.data() + static_cast<int64_t>(i) * sz);
    out.labels.push_back(sel[i]->label);
  }
  return out;
}

Tensor hflip(const Tensor& batch) {
  Tensor out = batch;
  const int n = batch.ndim() == 4 ? batch.dim(0) : 1;
  const int c = batch.dim(batch.ndim() - 3);
  const int h = batch.dim(batch.ndim() - 2);
  const int w = batch.dim(batch.ndim() - 1);
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y) {
        float* row = out.data() +
                     ((static_cast<int64_t>(i) * c + ch) * h + y) * static_cast<int64_t>(w);
        std::reverse(row, row + w);
      }
  return out;
}

Tensor resize_bilinear(const Tensor& batch, int out_h, int out_w) {
  const bool batched = batch.ndim() == 4;
  const int n = batched ? batch.dim(0) : 1;
  const int c = batch.dim(batch.ndim() - 3);
  const int h = batch.dim(batch.ndim() - 2);
  const int w = batch.dim(batch.ndim() - 1);
  Tensor out(batched ? std::vector<int>{n, c, out_h, out_w} : std::vector<int>{c, out_h, out_w});
  const float sy = static_cast<float>(h) / out_h;
  const float sx = static_cast<float>(w) / out_w;
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const float* src = batch.data() + (static_cast<int64_t>(i) * c + ch) *
                                            static_cast<int64_t>(h) * w;
      float* dst = out.data() + (static_cast<int64_t>(i) * c + ch) *
                                    static_cast<int64_t>(out_h) * out_w;
      for (int y = 0; y < out_h; ++y) {
        const float fy = std::clamp((y + 0.5f) * sy - 0.5f, 0.0f, static_cast<float>(h - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, h - 1);
        const float wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
          const float fx = std::clamp((x + 0.5f) * sx - 0.5f, 0.0f, static_cast<float>(w - 1));
          const int x0 = static_cast<int>(fx);
          const int x1 = std::min(x0 + 1, w - 1);
          const float wx = fx - x0;
          const float top = (1.0f - wx) * src[static_cast<int64_t>(y0) * w + x0] +
                            wx * src[static_cast<int64_t>(y0) * w + x1];
          const float bot = (1.0f - wx) * src[static_cast<int64_t>(y1) * w + x0] +
                            wx * src[static_cast<int64_t>(y1) * w + x1];
          dst[static_cast<int64_t>(y) * out_w + x] = (1.0f - wy) * top + wy * bot;
        }
      }
    }
  return out;
}

Tensor augment(const Tensor& batch, Rng& rng) {
  if (batch.ndim() != 4) throw std::invalid_argument("augment: (N,C,H,W) batch expected");
  const int n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  Tensor out = batch;
  const int64_t sz = static_cast<int64_t>(c) * h * w;
  for (int i = 0; i < n; ++i) {
    Tensor img({c, h, w});
    std::copy(batch.data() + i * sz, batch.data() + (i + 1) * sz, img.data());
    if (rng.uniform() < 0.5) img = hflip(img);
    const double s = rng.uniform(0.8, 1.0);
    const int ch_ = std::max(1, static_cast<int>(std::lround(s * h)));
    const int cw_ = std::max(1, static_cast<int>(std::lround(s * w)));
    const int y0 = ch_ < h ? rng.uniform_int(0, h - ch_) : 0;
    const int x0 = cw_ < w ? rng.uniform_int(0, w - cw_) : 0;
    if (ch_ < h || cw_ < w) {
      Tensor crop({c, ch_, cw_});
      for (int cc = 0; cc < c; ++cc)
        for (int y = 0; y < ch_; ++y)
          std::copy(img.data() + (static_cast<int64_t>(cc) * h + y0 + y) * w + x0,
                    img.data() + (static_cast<int64_t>(cc) * h + y0 + y) * w + x0 + cw_,
                    crop.data() + (static_cast<int64_t>(cc) * ch_ + y) * cw_);
      img = resize_bilinear(crop, h, w);
    }
    std::copy(img.data(), img.data() + sz, out.data() + i * sz);
  }
  return out;
}

void save_image(const Tensor& img, const std::string& path) {
  if (img.ndim() != 3 && !(img.ndim() == 4 && img.dim(0) == 1))
    throw std::invalid_argument("save_image: (3,H,W) or (1,3,H,W) expected");
  if (!cv::imwrite(path, tensor_to_mat(img)))
    throw std::runtime_error("save_image: cannot write " + path);
}

Tensor load_image(const std::string& path, int resize_to) {
  cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
  if (m.empty()) throw std::runtime_error("load_image: cannot read " + path);
  if (resize_to > 0 && (m.rows != resize_to || m.cols != resize_to))
    cv::resize(m, m, cv::Size(resize_to, resize_to), 0, 0, cv::INTER_LINEAR);
  return mat_to_tensor(m);
}

}  // namespace stylemix
