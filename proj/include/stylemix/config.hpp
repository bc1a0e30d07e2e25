#pragma once

#include <string>
#include <vector>

#include "stylemix/losses_reg.hpp"
#include "stylemix/networks.hpp"

namespace stylemix {

enum class Setting { Mmuit, Tunit };

std::string to_string(Setting s);
Setting setting_from_string(const std::string& s);

// Every run parameter in one flat struct; serializes losslessly to and from
// key=value text, with unknown keys rejected.
struct TrainConfig {
  Setting setting = Setting::Mmuit;

  NetworkConfig net;

  // base loss weights
  float lambda_sty = 1.0f;
  float lambda_ds = 1.0f;  // decays linearly to 0 over total_steps
  float lambda_cyc = 1.0f;
  float lambda_cls = 1.0f;
  float r1_gamma = 1.0f;

  // latent regularizers
  float lambda_shr = 1e-2f;
  float lambda_adv_mix = 1.0f;
  float lambda_cls_mix = 1.0f;

  // unsupervised-setting terms
  float lambda_mi = 1.0f;
  float lambda_style_contrast = 1.0f;
  float lambda_gen_contrast = 0.1f;
  float lambda_img_rec = 1.0f;
  int queue_capacity = 1024;
  float tau = 0.07f;

  // optimizer
  float lr_g = 1e-4f;
  float lr_e = 1e-4f;
  float lr_d = 1e-4f;
  float lr_f = 1e-6f;
  float adam_beta1 = 0.0f;
  float adam_beta2 = 0.99f;
  float ema_decay = 0.999f;  // 0 disables the averaged generator

  int batch_size = 16;
  int total_steps = 20000;
  uint64_t seed = 0;
  std::string data_dir;  // directory holding manifest.tsv and images

  void validate() const;
  RegularizerWeights regularizer_weights() const;
};

std::string serialize_config(const TrainConfig& cfg);
TrainConfig parse_config(const std::string& text);

TrainConfig load_config(const std::string& path);
void save_config(const TrainConfig& cfg, const std::string& path);

}  // namespace stylemix
