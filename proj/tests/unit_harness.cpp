#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "stylemix/config.hpp"
#include "stylemix/harness.hpp"
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

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.net.channels = 3;
  cfg.net.img_size = 8;
  cfg.net.style_dim = 4;
  cfg.net.latent_dim = 4;
  cfg.net.num_domains = 2;
  cfg.net.base_channels = 8;
  cfg.net.max_channels = 16;
  cfg.net.mlp_hidden = 16;
  cfg.batch_size = 4;
  cfg.total_steps = 4;
  cfg.seed = 3;
  return cfg;
}

// Images tagged through their first pixel so batch membership is recoverable.
SplitData tiny_split(int n, int img = 8, uint64_t seed = 12) {
  SplitData data;
  data.images = Tensor({n, 3, img, img});
  Rng rng(seed);
  rng.fill_normal(data.images, 0.4f);
  for (int64_t i = 0; i < data.images.size(); ++i)
    data.images[i] = std::clamp(data.images[i], -1.0f, 1.0f);
  const int64_t sz = static_cast<int64_t>(3) * img * img;
  for (int i = 0; i < n; ++i) {
    data.images[i * sz] = static_cast<float>(i) / n;
    data.labels.push_back(i % 2);
  }
  return data;
}

int tag_of(const Tensor& batch, int row, int n) {
  const int64_t sz = batch.size() / batch.dim(0);
  return static_cast<int>(std::lround(static_cast<double>(batch[row * sz]) * n));
}

}  // namespace

// -------------------------------------------------------------------- config

TEST_CASE("config serialization round-trips every field") {
  TrainConfig cfg = tiny_train_config();
  cfg.setting = Setting::Tunit;
  cfg.lambda_sty = 0.75f;
  cfg.lambda_ds = 2.5f;
  cfg.lambda_cyc = 0.125f;
  cfg.lambda_cls = 3.0f;
  cfg.r1_gamma = 0.7f;
  cfg.lambda_shr = 0.034f;
  cfg.lambda_adv_mix = 0.9f;
  cfg.lambda_cls_mix = 1.1f;
  cfg.lambda_mi = 0.6f;
  cfg.lambda_style_contrast = 0.8f;
  cfg.lambda_gen_contrast = 0.05f;
  cfg.lambda_img_rec = 1.25f;
  cfg.queue_capacity = 512;
  cfg.tau = 0.09f;
  cfg.lr_g = 3e-4f;
  cfg.lr_f = 2e-6f;
  cfg.adam_beta2 = 0.95f;
  cfg.ema_decay = 0.99f;
  cfg.total_steps = 777;
  cfg.seed = 424242;
  cfg.data_dir = "some/dir";

  const std::string text = serialize_config(cfg);
  TrainConfig back = parse_config(text);
  CHECK(serialize_config(back) == text);
  CHECK(back.setting == Setting::Tunit);
  CHECK(back.lambda_shr == cfg.lambda_shr);
  CHECK(back.queue_capacity == 512);
  CHECK(back.seed == 424242);
  CHECK(back.data_dir == "some/dir");
  CHECK(back.net.img_size == 8);
}

TEST_CASE("config parsing rejects unknown and duplicate keys") {
  const std::string base = serialize_config(tiny_train_config());
  CHECK_THROWS_WITH_AS(parse_config(base + "\nno_such_key=1\n"),
                       doctest::Contains("unknown key"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config(base + "\nbatch_size=8\n"), std::invalid_argument);
  CHECK_NOTHROW(parse_config(base + "\n# trailing comment\n"));
}

TEST_CASE("setting names round-trip and reject junk") {
  CHECK(setting_from_string(to_string(Setting::Mmuit)) == Setting::Mmuit);
  CHECK(setting_from_string(to_string(Setting::Tunit)) == Setting::Tunit);
  CHECK_THROWS_AS(setting_from_string("stargan"), std::invalid_argument);
}

TEST_CASE("config files round-trip through disk") {
  TempDir dir("stylemix_test_cfg");
  TrainConfig cfg = tiny_train_config();
  cfg.lambda_shr = 0.002f;
  const std::string path = (dir.path / "config.txt").string();
  save_config(cfg, path);
  TrainConfig back = load_config(path);
  CHECK(serialize_config(back) == serialize_config(cfg));
}

// ------------------------------------------------------------------- batcher

TEST_CASE("batcher order is a pure function of seed and epoch") {
  SplitData data = tiny_split(12);
  Batcher b1(data, 4, 7), b2(data, 4, 7), b3(data, 4, 8);
  bool same_as_b3 = true;
  for (int k = 0; k < 6; ++k) {
    auto x1 = b1.next(), x2 = b2.next(), x3 = b3.next();
    CHECK(max_abs_diff(x1.x, x2.x) == 0.0);
    CHECK(x1.y == x2.y);
    same_as_b3 = same_as_b3 && x1.x.same_shape(x3.x) && max_abs_diff(x1.x, x3.x) == 0.0;
  }
  CHECK_FALSE(same_as_b3);

  // one epoch covers every index exactly once
  Batcher b4(data, 4, 21);
  std::set<int> seen;
  for (int k = 0; k < 3; ++k) {
    auto batch = b4.next();
    for (int i = 0; i < 4; ++i) seen.insert(tag_of(batch.x, i, 12));
  }
  CHECK(seen.size() == 12);
}

TEST_CASE("domain and uniform reference sampling") {
  SplitData data = tiny_split(12);
  Batcher b(data, 4, 5);
  CHECK(b.num_domains() == 2);
  Rng rng(9);
  auto refs = b.sample_from_domains({0, 1, 1, 0}, rng);
  REQUIRE(refs.y == std::vector<int>{0, 1, 1, 0});
  for (int i = 0; i < 4; ++i)
    CHECK(tag_of(refs.x, i, 12) % 2 == refs.y[static_cast<size_t>(i)]);

  auto rand = b.sample_random(5, rng);
  CHECK(rand.x.dim(0) == 5);
  CHECK(rand.y.size() == 5);
}

// ------------------------------------------------------------- training step

TEST_CASE("labeled step records the active loss terms") {
  TrainConfig cfg = tiny_train_config();
  TrainState st = make_train_state(cfg);
  SplitData data = tiny_split(12);
  Batcher batcher(data, cfg.batch_size, cfg.seed);
  LossRecord rec = train_step_mmuit(st, batcher.next(), batcher);
  for (const char* name : {"adv_d", "cls_d", "r1", "adv_g", "cls_g", "sty", "ds", "cyc", "shr",
                           "adv_mix_d", "adv_mix_g", "cls_mix_d", "cls_mix_g"}) {
    CHECK_MESSAGE(rec.has(name), name);
    CHECK(std::isfinite(rec.term(name)));
  }
  CHECK_FALSE(rec.has("mi"));
  CHECK_FALSE(rec.has("img_rec"));
  CHECK_FALSE(rec.has("con_e"));
  CHECK(st.step == 1);
}

TEST_CASE("zero-weight terms disappear from the record") {
  TrainConfig cfg = tiny_train_config();
  cfg.lambda_ds = 0.0f;
  cfg.lambda_shr = 0.0f;
  cfg.lambda_adv_mix = 0.0f;
  cfg.lambda_cls_mix = 0.0f;
  TrainState st = make_train_state(cfg);
  SplitData data = tiny_split(12);
  Batcher batcher(data, cfg.batch_size, cfg.seed);
  LossRecord rec = train_step_mmuit(st, batcher.next(), batcher);
  CHECK_FALSE(rec.has("ds"));
  CHECK_FALSE(rec.has("shr"));
  CHECK_FALSE(rec.has("adv_mix_d"));
  CHECK_FALSE(rec.has("adv_mix_g"));
  CHECK_FALSE(rec.has("cls_mix_d"));
  CHECK_FALSE(rec.has("cls_mix_g"));
  CHECK(rec.has("adv_d"));
}

TEST_CASE("unsupervised step uses the queue-backed contrastive terms") {
  TrainConfig cfg = tiny_train_config();
  cfg.setting = Setting::Tunit;
  TrainState st = make_train_state(cfg);
  SplitData data = tiny_split(12);
  Batcher batcher(data, cfg.batch_size, cfg.seed);
  LossRecord r0 = train_step_tunit(st, batcher.next(), batcher);
  CHECK(r0.has("mi"));
  CHECK(r0.has("img_rec"));
  CHECK_FALSE(r0.has("con_e"));  // queue still empty at the first step
  REQUIRE(st.queue != nullptr);
  CHECK(st.queue->size() == cfg.batch_size);

  LossRecord r1 = train_step_tunit(st, batcher.next(), batcher);
  CHECK(r1.has("con_e"));
  CHECK(r1.has("con_g"));
  CHECK(st.queue->size() == 2 * cfg.batch_size);
  CHECK(r1.has("sty"));  // reconstruction stays on alongside the contrastive pull
}

TEST_CASE("a poisoned parameter aborts with the offending term and step") {
  TrainConfig cfg = tiny_train_config();
  TrainState st = make_train_state(cfg);
  std::vector<Param*> pg;
  st.gen->collect(pg);
  pg.front()->value[0] = std::numeric_limits<float>::quiet_NaN();
  SplitData data = tiny_split(12);
  Batcher batcher(data, cfg.batch_size, cfg.seed);
  try {
    train_step_mmuit(st, batcher.next(), batcher);
    FAIL("expected a non-finite loss abort");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("non-finite loss term") != std::string::npos);
    CHECK(msg.find("step") != std::string::npos);
  }
}

TEST_CASE("train loop writes losses.tsv and a final checkpoint") {
  TempDir dir("stylemix_test_train");
  TrainConfig cfg = tiny_train_config();
  cfg.total_steps = 3;
  TrainState st = make_train_state(cfg);
  SplitData data = tiny_split(12);
  auto records = train(st, data, dir.str(), 1);
  CHECK(records.size() == 3);
  CHECK(fs::exists(dir.path / "losses.tsv"));
  CHECK(fs::exists(dir.path / "checkpoint.bin"));

  std::ifstream losses(dir.path / "losses.tsv");
  std::string line;
  int rows = 0;
  while (std::getline(losses, line))
    if (!line.empty()) ++rows;
  CHECK(rows >= 3);  // one row per step and term
}

// ----------------------------------------------------------- checkpoint/eval

TEST_CASE("checkpoint round trip preserves forward outputs bit-exactly") {
  TempDir dir("stylemix_test_ckpt");
  TrainConfig cfg = tiny_train_config();
  cfg.total_steps = 2;
  TrainState st = make_train_state(cfg);
  SplitData data = tiny_split(12);
  train(st, data, "", 100);

  const std::string path = (dir.path / "ckpt.bin").string();
  save_checkpoint(st, path);
  TrainState back = load_checkpoint(path);
  CHECK(back.step == st.step);
  CHECK(serialize_config(back.cfg) == serialize_config(st.cfg));

  EvalContext a = make_eval_context(st);
  EvalContext b = load_eval_context(path);
  Rng rng(99);
  Tensor x = Tensor({2, 3, 8, 8});
  rng.fill_normal(x, 0.4f);
  Tensor sa = a.encode(x);
  Tensor sb = b.encode(x);
  CHECK(max_abs_diff(sa, sb) == 0.0);
  Tensor src({1, 3, 8, 8});
  rng.fill_normal(src, 0.4f);
  CHECK(max_abs_diff(a.generate(src, sa), b.generate(src, sb)) == 0.0);
  CHECK(a.classify(x) == b.classify(x));
}

TEST_CASE("eval context applies the averaged generator weights") {
  TrainConfig cfg = tiny_train_config();
  cfg.total_steps = 2;
  TrainState st = make_train_state(cfg);
  SplitData data = tiny_split(12);
  train(st, data, "", 100);
  REQUIRE(st.ema != nullptr);

  EvalContext ctx = make_eval_context(st);
  Rng rng(5);
  Tensor src({1, 3, 8, 8});
  rng.fill_normal(src, 0.4f);
  Tensor s = ctx.encode(src);
  Tensor ema_out = ctx.generate(src, s);

  // the raw trained generator has drifted from the shadow
  Tape t;
  Tensor raw_out = st.gen->forward(src, s, t);
  CHECK(max_abs_diff(ema_out, raw_out) > 0.0);

  // with averaging disabled both views coincide
  TrainConfig cfg2 = tiny_train_config();
  cfg2.ema_decay = 0.0f;
  cfg2.total_steps = 2;
  TrainState st2 = make_train_state(cfg2);
  train(st2, data, "", 100);
  CHECK(st2.ema == nullptr);
  EvalContext ctx2 = make_eval_context(st2);
  Tensor s2 = ctx2.encode(src);
  Tape t2;
  CHECK(max_abs_diff(ctx2.generate(src, s2), st2.gen->forward(src, s2, t2)) == 0.0);
}

TEST_CASE("interpolation grids hit the endpoint translations exactly") {
  TrainConfig cfg = tiny_train_config();
  TrainState st = make_train_state(cfg);
  EvalContext ctx = make_eval_context(st);
  Rng rng(17);
  Tensor source({1, 3, 8, 8}), ref_a({1, 3, 8, 8}), ref_b({1, 3, 8, 8});
  rng.fill_normal(source, 0.4f);
  rng.fill_normal(ref_a, 0.4f);
  rng.fill_normal(ref_b, 0.4f);

  InterpolationGrid grid = make_interpolation_grid(ctx, source, ref_a, ref_b, 6);
  REQUIRE(grid.frames.size() == 6);
  Tensor first = ctx.generate(source, ctx.encode(ref_a));
  Tensor last = ctx.generate(source, ctx.encode(ref_b));
  CHECK(max_abs_diff(grid.frames.front(), first) == 0.0);
  CHECK(max_abs_diff(grid.frames.back(), last) == 0.0);

  TempDir dir("stylemix_test_grid");
  const std::string out = (dir.path / "grid.png").string();
  write_grid_image(grid, out);
  CHECK(fs::exists(out));
}

TEST_CASE("eval report formatting and lookup") {
  EvalReport rep;
  rep.metrics = {{"fid", 12.5}, {"p2", 0.25}};
  rep.provenance = {{"T", "20"}, {"seed", "0"}};
  CHECK(rep.metric("p2") == 0.25);
  CHECK_THROWS(rep.metric("ppl"));
  const std::string text = rep.to_text();
  CHECK(text.find("fid\t12.5") != std::string::npos);
  CHECK(text.find("T=20") != std::string::npos);

  TempDir dir("stylemix_test_report");
  const std::string path = (dir.path / "report.txt").string();
  rep.write(path);
  std::ifstream in(path);
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(all == text);
}
