#include "stylemix/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace stylemix {

std::string to_string(Setting s) { return s == Setting::Mmuit ? "mmuit" : "tunit"; }

Setting setting_from_string(const std::string& s) {
  if (s == "mmuit") return Setting::Mmuit;
  if (s == "tunit") return Setting::Tunit;
  throw std::invalid_argument("setting must be 'mmuit' or 'tunit', got '" + s + "'");
}

namespace {

struct Field {
  std::string key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

std::string fmt_f(float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

float parse_f(const std::string& key, const std::string& v) {
  size_t pos = 0;
  float out;
  try {
    out = std::stof(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad value for " + key + ": '" + v + "'");
  }
  if (pos != v.size()) throw std::invalid_argument("config: trailing junk in " + key);
  return out;
}

int parse_i(const std::string& key, const std::string& v) {
  size_t pos = 0;
  int out;
  try {
    out = std::stoi(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad value for " + key + ": '" + v + "'");
  }
  if (pos != v.size()) throw std::invalid_argument("config: trailing junk in " + key);
  return out;
}

std::vector<Field> make_fields() {
  std::vector<Field> f;
  auto add_f = [&](const std::string& key, float TrainConfig::* p) {
    f.push_back({key, [p](const TrainConfig& c) { return fmt_f(c.*p); },
                 [p, key](TrainConfig& c, const std::string& v) { c.*p = parse_f(key, v); }});
  };
  auto add_i = [&](const std::string& key, int TrainConfig::* p) {
    f.push_back({key, [p](const TrainConfig& c) { return std::to_string(c.*p); },
                 [p, key](TrainConfig& c, const std::string& v) { c.*p = parse_i(key, v); }});
  };
  auto add_net = [&](const std::string& key, int NetworkConfig::* p) {
    f.push_back({key, [p](const TrainConfig& c) { return std::to_string(c.net.*p); },
                 [p, key](TrainConfig& c, const std::string& v) { c.net.*p = parse_i(key, v); }});
  };
  f.push_back({"setting", [](const TrainConfig& c) { return to_string(c.setting); },
               [](TrainConfig& c, const std::string& v) { c.setting = setting_from_string(v); }});
  add_net("channels", &NetworkConfig::channels);
  add_net("img_size", &NetworkConfig::img_size);
  add_net("style_dim", &NetworkConfig::style_dim);
  add_net("latent_dim", &NetworkConfig::latent_dim);
  add_net("num_domains", &NetworkConfig::num_domains);
  add_net("base_channels", &NetworkConfig::base_channels);
  add_net("max_channels", &NetworkConfig::max_channels);
  add_net("mlp_hidden", &NetworkConfig::mlp_hidden);
  add_f("lambda_sty", &TrainConfig::lambda_sty);
  add_f("lambda_ds", &TrainConfig::lambda_ds);
  add_f("lambda_cyc", &TrainConfig::lambda_cyc);
  add_f("lambda_cls", &TrainConfig::lambda_cls);
  add_f("r1_gamma", &TrainConfig::r1_gamma);
  add_f("lambda_shr", &TrainConfig::lambda_shr);
  add_f("lambda_adv_mix", &TrainConfig::lambda_adv_mix);
  add_f("lambda_cls_mix", &TrainConfig::lambda_cls_mix);
  add_f("lambda_mi", &TrainConfig::lambda_mi);
  add_f("lambda_style_contrast", &TrainConfig::lambda_style_contrast);
  add_f("lambda_gen_contrast", &TrainConfig::lambda_gen_contrast);
  add_f("lambda_img_rec", &TrainConfig::lambda_img_rec);
  add_i("queue_capacity", &TrainConfig::queue_capacity);
  add_f("tau", &TrainConfig::tau);
  add_f("lr_g", &TrainConfig::lr_g);
  add_f("lr_e", &TrainConfig::lr_e);
  add_f("lr_d", &TrainConfig::lr_d);
  add_f("lr_f", &TrainConfig::lr_f);
  add_f("adam_beta1", &TrainConfig::adam_beta1);
  add_f("adam_beta2", &TrainConfig::adam_beta2);
  add_f("ema_decay", &TrainConfig::ema_decay);
  add_i("batch_size", &TrainConfig::batch_size);
  add_i("total_steps", &TrainConfig::total_steps);
  f.push_back({"seed", [](const TrainConfig& c) { return std::to_string(c.seed); },
               [](TrainConfig& c, const std::string& v) {
                 try {
                   c.seed = std::stoull(v);
                 } catch (const std::exception&) {
                   throw std::invalid_argument("config: bad value for seed: '" + v + "'");
                 }
               }});
  f.push_back({"data_dir", [](const TrainConfig& c) { return c.data_dir; },
               [](TrainConfig& c, const std::string& v) { c.data_dir = v; }});
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = make_fields();
  return f;
}

std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void TrainConfig::validate() const {
  net.validate();
  if (batch_size < 2) throw std::invalid_argument("config: batch_size must be >= 2");
  if (total_steps < 1) throw std::invalid_argument("config: total_steps must be >= 1");
  if (queue_capacity < 1) throw std::invalid_argument("config: queue_capacity must be >= 1");
  if (tau <= 0.0f) throw std::invalid_argument("config: tau must be positive");
  if (ema_decay < 0.0f || ema_decay >= 1.0f)
    throw std::invalid_argument("config: ema_decay must lie in [0, 1)");
  for (float l : {lambda_sty, lambda_ds, lambda_cyc, lambda_cls, r1_gamma, lambda_shr,
                  lambda_adv_mix, lambda_cls_mix, lambda_mi, lambda_style_contrast,
                  lambda_gen_contrast, lambda_img_rec})
    if (l < 0.0f) throw std::invalid_argument("config: loss weights must be nonnegative");
  for (float lr : {lr_g, lr_e, lr_d, lr_f})
    if (lr <= 0.0f) throw std::invalid_argument("config: learning rates must be positive");
}

RegularizerWeights TrainConfig::regularizer_weights() const {
  RegularizerWeights w;
  w.lambda_shr = lambda_shr;
  w.lambda_adv_mix = lambda_adv_mix;
  w.lambda_cls_mix = lambda_cls_mix;
  return w;
}

std::string serialize_config(const TrainConfig& cfg) {
  std::ostringstream out;
  for (const Field& f : fields()) out << f.key << '=' << f.get(cfg) << '\n';
  return out.str();
}

TrainConfig parse_config(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " has no '='");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    const Field* field = nullptr;
    for (const Field& f : fields())
      if (f.key == key) {
        field = &f;
        break;
      }
    if (!field) throw std::invalid_argument("config: unknown key '" + key + "'");
    if (!seen.insert(key).second)
      throw std::invalid_argument("config: duplicate key '" + key + "'");
    field->set(cfg, val);
  }
  return cfg;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void save_config(const TrainConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_config: cannot open " + path);
  out << serialize_config(cfg);
}

}  // namespace stylemix
