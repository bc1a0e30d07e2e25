#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "stylemix/data.hpp"
#include "test_util.hpp"

using namespace stylemix;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.same_shape(b));
  double mx = 0.0;
  for (int64_t i = 0; i < a.size(); ++i)
    mx = std::max(mx, std::abs(static_cast<double>(a[i]) - b[i]));
  return mx;
}

}  // namespace

TEST_CASE("default specs are pairwise separable; overlap everywhere throws") {
  for (int m = 2; m <= 6; ++m) CHECK_NOTHROW(validate_domain_specs(default_synthetic_specs(m)));

  // identical style bands overlap on every factor regardless of shape family
  std::vector<SyntheticDomainSpec> clash(2);
  clash[0].domain = 0;
  clash[1].domain = 1;
  clash[1].shape = SyntheticDomainSpec::Shape::Rectangle;
  CHECK_THROWS_AS(validate_domain_specs(clash), std::invalid_argument);

  // one disjoint band restores separability
  clash[1].freq_min = 5.0f;
  clash[1].freq_max = 6.0f;
  CHECK_NOTHROW(validate_domain_specs(clash));

  std::vector<SyntheticDomainSpec> inverted(2);
  inverted[1].domain = 1;
  inverted[1].hue_min = 0.9f;
  inverted[1].hue_max = 0.2f;
  CHECK_THROWS_AS(validate_domain_specs(inverted), std::invalid_argument);
}

TEST_CASE("sampled style factors stay inside the domain bands") {
  auto specs = default_synthetic_specs(3);
  Rng rng(5);
  for (const auto& spec : specs)
    for (int i = 0; i < 500; ++i) {
      SyntheticFactors f = sample_factors(spec, rng);
      CHECK(f.hue >= spec.hue_min);
      CHECK(f.hue <= spec.hue_max);
      CHECK(f.freq >= spec.freq_min);
      CHECK(f.freq <= spec.freq_max);
      CHECK(f.stroke >= spec.stroke_min);
      CHECK(f.stroke <= spec.stroke_max);
      CHECK(f.cx >= 0.35f);
      CHECK(f.cx <= 0.65f);
      CHECK(f.scale >= 0.18f);
      CHECK(f.scale <= 0.32f);
    }
}

TEST_CASE("content factor distributions are shared across domains") {
  // two-sample KS on the center coordinate between domain 0 and domain 2
  auto specs = default_synthetic_specs(3);
  const int n = 2000;
  std::vector<double> a(n), b(n);
  Rng r1(7), r2(7777);
  for (int i = 0; i < n; ++i) {
    a[static_cast<size_t>(i)] = sample_factors(specs[0], r1).cx;
    b[static_cast<size_t>(i)] = sample_factors(specs[2], r2).cx;
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / n));
  }
  const double n_eff = static_cast<double>(n) * n / (2.0 * n);
  CHECK(testutil::ks_p_value(d, n_eff) > 0.01);
}

TEST_CASE("rendering is deterministic and in range") {
  auto specs = default_synthetic_specs(2);
  Rng r1(11), r2(11);
  SyntheticFactors f1 = sample_factors(specs[0], r1);
  SyntheticFactors f2 = sample_factors(specs[0], r2);
  Tensor img1 = render_synthetic_image(specs[0], f1, 32);
  Tensor img2 = render_synthetic_image(specs[0], f2, 32);
  CHECK(img1.shape() == std::vector<int>{3, 32, 32});
  CHECK(max_abs_diff(img1, img2) == 0.0);
  for (int64_t i = 0; i < img1.size(); ++i) {
    CHECK(img1[i] >= -1.0f);
    CHECK(img1[i] <= 1.0f);
  }
}

TEST_CASE("generate_synthetic writes the expected layout and label histogram") {
  TempDir dir("stylemix_test_synth");
  auto specs = default_synthetic_specs(3);
  DatasetManifest m = generate_synthetic(specs, 6, 2, 16, 42, dir.str());
  CHECK(m.num_domains == 3);
  REQUIRE(m.entries.size() == 3 * (6 + 2));
  std::vector<int> train_count(3, 0), test_count(3, 0);
  for (const auto& e : m.entries) {
    REQUIRE(e.label >= 0);
    REQUIRE(e.label < 3);
    (e.split == "train" ? train_count : test_count)[static_cast<size_t>(e.label)]++;
    CHECK(fs::exists(dir.path / e.path));
  }
  for (int d = 0; d < 3; ++d) {
    CHECK(train_count[static_cast<size_t>(d)] == 6);
    CHECK(test_count[static_cast<size_t>(d)] == 2);
  }
  CHECK(fs::exists(dir.path / "manifest.tsv"));

  // same seed regenerates bit-identical pixels
  TempDir dir2("stylemix_test_synth2");
  generate_synthetic(specs, 6, 2, 16, 42, dir2.str());
  Tensor a = load_image((dir.path / m.entries[0].path).string());
  Tensor b = load_image((dir2.path / m.entries[0].path).string());
  CHECK(max_abs_diff(a, b) == 0.0);

  SplitData train = load_split(m, dir.str(), "train", 16);
  CHECK(train.images.shape() == std::vector<int>{18, 3, 16, 16});
  CHECK(train.labels.size() == 18);
  SplitData test = load_split(m, dir.str(), "test", 16);
  CHECK(test.images.dim(0) == 6);
}

TEST_CASE("folder datasets take labels from sorted subdirectory names") {
  TempDir dir("stylemix_test_folder");
  Tensor img({3, 8, 8});
  img.fill(0.5f);
  fs::create_directories(dir.path / "zebra");
  fs::create_directories(dir.path / "apple");
  for (int i = 0; i < 3; ++i)
    save_image(img, (dir.path / "apple" / ("a" + std::to_string(i) + ".png")).string());
  for (int i = 0; i < 2; ++i)
    save_image(img, (dir.path / "zebra" / ("z" + std::to_string(i) + ".png")).string());

  DatasetManifest m = load_folder_dataset(dir.str());
  CHECK(m.num_domains == 2);
  REQUIRE(m.entries.size() == 5);
  std::vector<int> labels;
  for (const auto& e : m.entries) {
    labels.push_back(e.label);
    CHECK(e.split == "train");
  }
  std::sort(labels.begin(), labels.end());
  CHECK(labels == std::vector<int>{0, 0, 0, 1, 1});  // apple < zebra

  // a single class is not a translation dataset
  TempDir one("stylemix_test_folder_one");
  fs::create_directories(one.path / "only");
  save_image(img, (one.path / "only" / "x.png").string());
  CHECK_THROWS(load_folder_dataset(one.str()));
}

TEST_CASE("manifest round trip and validation") {
  DatasetManifest m;
  m.num_domains = 2;
  m.entries = {{"d0/a.png", 0, "train"}, {"d1/b.png", 1, "train"}, {"d1/c.png", 1, "test"}};
  CHECK_NOTHROW(m.validate());

  TempDir dir("stylemix_test_manifest");
  const std::string path = (dir.path / "manifest.tsv").string();
  write_manifest(m, path);
  DatasetManifest back = read_manifest(path);
  CHECK(back.num_domains == 2);
  REQUIRE(back.entries.size() == 3);
  CHECK(back.entries[1].path == "d1/b.png");
  CHECK(back.entries[1].label == 1);
  CHECK(back.entries[2].split == "test");

  DatasetManifest bad = m;
  bad.entries.push_back({"d0/a.png", 0, "test"});  // same path in both splits
  CHECK_THROWS(bad.validate());
  DatasetManifest badlabel = m;
  badlabel.entries[0].label = 7;
  CHECK_THROWS(badlabel.validate());
}

TEST_CASE("image save/load round trip is exact on the quantization grid") {
  TempDir dir("stylemix_test_png");
  Rng rng(13);
  Tensor img({3, 12, 12});
  for (int64_t i = 0; i < img.size(); ++i) {
    const int p = rng.uniform_int(0, 255);
    img[i] = 2.0f * p / 255.0f - 1.0f;
  }
  const std::string path = (dir.path / "x.png").string();
  save_image(img, path);
  Tensor back = load_image(path);  // loads as (1, 3, H, W)
  REQUIRE(back.shape() == std::vector<int>{1, 3, 12, 12});
  double mx = 0.0;
  for (int64_t i = 0; i < img.size(); ++i)
    mx = std::max(mx, std::abs(static_cast<double>(img[i]) - back[i]));
  CHECK(mx < 1e-6);

  Tensor resized = load_image(path, 6);
  CHECK(resized.shape() == std::vector<int>{1, 3, 6, 6});
}

TEST_CASE("hflip is an involution and mirrors columns") {
  Rng rng(17);
  Tensor x = testutil::random_tensor({2, 3, 5, 4}, rng);
  Tensor y = hflip(x);
  CHECK(y.at4(0, 0, 0, 0) == x.at4(0, 0, 0, 3));
  CHECK(y.at4(1, 2, 4, 1) == x.at4(1, 2, 4, 2));
  CHECK(max_abs_diff(hflip(y), x) == 0.0);
}

TEST_CASE("bilinear resize fixed points and mean preservation") {
  Rng rng(19);
  Tensor x = testutil::random_tensor({1, 3, 8, 8}, rng);
  CHECK(max_abs_diff(resize_bilinear(x, 8, 8), x) == 0.0);

  Tensor c({1, 1, 4, 4});
  c.fill(0.37f);
  Tensor up = resize_bilinear(c, 9, 9);
  CHECK(up.shape() == std::vector<int>{1, 1, 9, 9});
  CHECK(max_abs_diff(up, [&] {
          Tensor t({1, 1, 9, 9});
          t.fill(0.37f);
          return t;
        }()) < 1e-6);
}

TEST_CASE("augmentation keeps shape, stays deterministic, varies per draw") {
  Rng rng(23);
  Tensor batch = testutil::random_tensor({4, 3, 16, 16}, rng, 0.5f);
  Rng a1(31), a2(31), a3(97);
  Tensor y1 = augment(batch, a1);
  Tensor y2 = augment(batch, a2);
  Tensor y3 = augment(batch, a3);
  CHECK(y1.same_shape(batch));
  CHECK(max_abs_diff(y1, y2) == 0.0);
  CHECK(max_abs_diff(y1, y3) > 0.0);  // a different stream picks different crops

  float mn = 1e9f, mx = -1e9f;
  for (int64_t i = 0; i < y1.size(); ++i) {
    mn = std::min(mn, y1[i]);
    mx = std::max(mx, y1[i]);
  }
  // crops and flips only rearrange and blend existing values
  float bmn = 1e9f, bmx = -1e9f;
  for (int64_t i = 0; i < batch.size(); ++i) {
    bmn = std::min(bmn, batch[i]);
    bmx = std::max(bmx, batch[i]);
  }
  CHECK(mn >= bmn - 1e-5f);
  CHECK(mx <= bmx + 1e-5f);
}
