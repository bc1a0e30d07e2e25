#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "stylemix/config.hpp"
#include "stylemix/core.hpp"
#include "stylemix/data.hpp"
#include "stylemix/metrics.hpp"
#include "stylemix/networks.hpp"
#include "stylemix/optim.hpp"
#include "stylemix/perceptual.hpp"
#include "stylemix/tunit.hpp"

namespace stylemix {

struct LossRecord {
  int64_t step = 0;
  // term name -> value, each stored with its own sign convention; terms with
  // zero weight are absent
  std::vector<std::pair<std::string, double>> terms;
  double term(const std::string& name) const;
  bool has(const std::string& name) const;
};

// Epoch-shuffled mini-batches plus per-domain reference sampling; the
// delivered order is a pure function of (seed, epoch).
class Batcher {
 public:
  Batcher(const SplitData& data, int batch_size, uint64_t seed);

  struct Batch {
    Tensor x;
    std::vector<int> y;
  };

  Batch next();
  // One image per requested domain label, drawn with the given source.
  Batch sample_from_domains(const std::vector<int>& domains, Rng& rng) const;
  // Uniform draws ignoring labels (the unsupervised setting's reference source).
  Batch sample_random(int count, Rng& rng) const;
  int num_domains() const { return static_cast<int>(by_domain_.size()); }

 private:
  const SplitData* data_;
  int batch_size_;
  uint64_t seed_;
  int64_t epoch_ = 0;
  size_t cursor_ = 0;
  std::vector<int> order_;
  std::vector<std::vector<int>> by_domain_;
  void reshuffle();
  Batch gather(const std::vector<int>& idx) const;
};

struct TrainState {
  TrainConfig cfg;
  std::unique_ptr<StyleEncoder> enc;
  std::unique_ptr<MappingNetwork> map;
  std::unique_ptr<Generator> gen;
  std::unique_ptr<Discriminator> disc;
  std::unique_ptr<Adam> opt_e, opt_f, opt_g, opt_d;
  std::unique_ptr<EmaCopy> ema;         // over generator parameters, optional
  std::unique_ptr<NegativeQueue> queue;  // unsupervised setting only
  Rng rng;
  int64_t step = 0;

  std::vector<Param*> gen_params() const;
};

TrainState make_train_state(const TrainConfig& cfg);

// One D update then one G/E/F update on the labeled setting.
LossRecord train_step_mmuit(TrainState& state, const Batcher::Batch& batch, Batcher& batcher);

// Unsupervised setting: ground-truth labels are ignored; pseudo-labels from
// the domain head route every place the labeled step used y.
LossRecord train_step_tunit(TrainState& state, const Batcher::Batch& batch, Batcher& batcher);

// Full loop; appends one record per step and writes losses.tsv + checkpoints
// under out_dir (empty out_dir -> nothing written).
std::vector<LossRecord> train(TrainState& state, const SplitData& data,
                              const std::string& out_dir, int log_every = 100);

void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);

// Evaluation-time view: EMA weights (when present) already applied to gen.
struct EvalContext {
  TrainConfig cfg;
  std::unique_ptr<StyleEncoder> enc;
  std::unique_ptr<MappingNetwork> map;
  std::unique_ptr<Generator> gen;
  std::unique_ptr<Discriminator> disc;
  int64_t step = 0;

  Tensor encode(const Tensor& x) const;    // untaped E
  Tensor generate(const Tensor& x, const Tensor& s) const;  // untaped G, broadcasts x
  std::vector<int> classify(const Tensor& x) const;  // pseudo-labels from D's head
};

EvalContext make_eval_context(const TrainState& state);
EvalContext load_eval_context(const std::string& checkpoint_path);

struct EvalParams {
  int num_sources = 200;   // desk-scale default; protocol reference is 1000
  int t_steps = 20;        // T
  int styles_per_domain = 10;
  int p2_triplets = 1000;
  int p2eq_draws = 1000;
  double p2_eps = 1e-8;
  double ppl_eps = 1e-2;
  int ppl_samples = 1000;
  uint64_t seed = 0;
  int phi_train_steps = 300;
  std::vector<std::string> metrics = {"fid", "lpips", "ppl", "p2", "p2eq"};
};

struct EvalReport {
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::pair<std::string, std::string>> provenance;
  double metric(const std::string& name) const;
  std::string to_text() const;  // metric<TAB>value lines, then a provenance block
  void write(const std::string& path) const;
};

// Trains the shared feature extractor deterministically on the train split
// (seeded), so compared models score under one phi.
std::unique_ptr<PerceptualEmbedder> build_eval_phi(const SplitData& train, int num_domains,
                                                   int steps, uint64_t seed);

EvalReport run_interpolation_eval(const EvalContext& ctx, const SplitData& test,
                                  const SplitData& train, const EvalParams& params);

// One row of T interpolation frames with source/reference thumbnails; frame
// endpoints are the direct translations, bit-exact.
struct InterpolationGrid {
  std::vector<Tensor> frames;  // T images (1,C,H,W)
  Tensor source, ref_a, ref_b;
};

InterpolationGrid make_interpolation_grid(const EvalContext& ctx, const Tensor& source,
                                          const Tensor& ref_a, const Tensor& ref_b, int t);

void render_interpolation_grid(const EvalContext& ctx, const std::string& source_path,
                               const std::string& ref_a_path, const std::string& ref_b_path,
                               int t, const std::string& out_path);

// Same, with both references required to sit in one domain (per the domain
// head's assignment).
void intra_domain_grid(const EvalContext& ctx, const std::string& source_path,
                       const std::string& ref_a_path, const std::string& ref_b_path, int t,
                       const std::string& out_path);

// Writes the grid row (plus thumbnails) as one image file.
void write_grid_image(const InterpolationGrid& grid, const std::string& out_path);

}  // namespace stylemix
