#include "stylemix/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "stylemix/losses_base.hpp"
#include "stylemix/losses_reg.hpp"

namespace fs = std::filesystem;

namespace stylemix {

namespace {

void check_term(double v, const char* name, int64_t step) {
  if (!std::isfinite(v))
    throw std::runtime_error("non-finite loss term '" + std::string(name) + "' at step " +
                             std::to_string(step));
}

// d probs / d logits for the elementwise-sigmoid head.
Tensor sigmoid_grad_to_logits(const Tensor& g_probs, const Tensor& probs) {
  Tensor g = g_probs;
  for (int64_t i = 0; i < g.size(); ++i) g[i] *= probs[i] * (1.0f - probs[i]);
  return g;
}

Tensor softmax_grad_to_logits(const Tensor& g_probs, const Tensor& probs) {
  const int b = probs.dim(0), m = probs.dim(1);
  Tensor g(probs.shape());
  for (int i = 0; i < b; ++i) {
    double dot = 0.0;
    for (int j = 0; j < m; ++j) dot += static_cast<double>(g_probs.at2(i, j)) * probs.at2(i, j);
    for (int j = 0; j < m; ++j)
      g.at2(i, j) = static_cast<float>(probs.at2(i, j) * (g_probs.at2(i, j) - dot));
  }
  return g;
}

std::vector<float> tensor_row(const Tensor& t, int i) {
  const int d = t.dim(1);
  return std::vector<float>(t.data() + static_cast<int64_t>(i) * d,
                            t.data() + static_cast<int64_t>(i + 1) * d);
}

std::vector<float> normalize_vec(const std::vector<float>& v, double& nrm_out) {
  double nrm = 0.0;
  for (float x : v) nrm += static_cast<double>(x) * x;
  nrm = std::sqrt(nrm);
  nrm_out = std::max(nrm, 1e-12);
  std::vector<float> n(v.size());
  for (size_t i = 0; i < v.size(); ++i) n[i] = static_cast<float>(v[i] / nrm_out);
  return n;
}

// Pulls the gradient wrt the normalized vector back to the raw vector.
void normalize_backward(const std::vector<float>& n, double nrm, const std::vector<float>& gn,
                        float scale, Tensor& graw, int row) {
  double dot = 0.0;
  for (size_t i = 0; i < n.size(); ++i) dot += static_cast<double>(gn[i]) * n[i];
  for (size_t i = 0; i < n.size(); ++i)
    graw.at2(row, static_cast<int>(i)) +=
        scale * static_cast<float>((gn[i] - dot * n[i]) / nrm);
}

Tensor scaled(const Tensor& t, float s) {
  Tensor out = t;
  out *= s;
  return out;
}

std::string fmt_val(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

double LossRecord::term(const std::string& name) const {
  for (const auto& [k, v] : terms)
    if (k == name) return v;
  throw std::out_of_range("LossRecord: no term '" + name + "'");
}

bool LossRecord::has(const std::string& name) const {
  for (const auto& [k, v] : terms)
    if (k == name) return true;
  return false;
}

// ---------------------------------------------------------------- Batcher

Batcher::Batcher(const SplitData& data, int batch_size, uint64_t seed)
    : data_(&data), batch_size_(batch_size), seed_(seed) {
  const int n = data.images.dim(0);
  if (n < batch_size) throw std::invalid_argument("Batcher: dataset smaller than batch size");
  int m = 0;
  for (int l : data.labels) m = std::max(m, l + 1);
  by_domain_.resize(static_cast<size_t>(m));
  for (int i = 0; i < n; ++i) by_domain_[static_cast<size_t>(data.labels[i])].push_back(i);
  for (const auto& d : by_domain_)
    if (d.empty()) throw std::invalid_argument("Batcher: empty domain");
  reshuffle();
}

void Batcher::reshuffle() {
  Rng epoch_rng(seed_ ^ (0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(epoch_ + 1)));
  order_ = epoch_rng.permutation(data_->images.dim(0));
  cursor_ = 0;
}

Batcher::Batch Batcher::gather(const std::vector<int>& idx) const {
  const int c = data_->images.dim(1), h = data_->images.dim(2), w = data_->images.dim(3);
  const int64_t sz = static_cast<int64_t>(c) * h * w;
  Batch b;
  b.x = Tensor({static_cast<int>(idx.size()), c, h, w});
  for (size_t i = 0; i < idx.size(); ++i) {
    std::copy(data_->images.data() + idx[i] * sz, data_->images.data() + (idx[i] + 1) * sz,
              b.x.data() + static_cast<int64_t>(i) * sz);
    b.y.push_back(data_->labels[static_cast<size_t>(idx[i])]);
  }
  return b;
}

Batcher::Batch Batcher::next() {
  std::vector<int> idx;
  while (static_cast<int>(idx.size()) < batch_size_) {
    if (cursor_ >= order_.size()) {
      ++epoch_;
      reshuffle();
    }
    idx.push_back(order_[cursor_++]);
  }
  return gather(idx);
}

Batcher::Batch Batcher::sample_from_domains(const std::vector<int>& domains, Rng& rng) const {
  std::vector<int> idx;
  for (int d : domains) {
    if (d < 0 || d >= num_domains())
      throw std::invalid_argument("Batcher: domain out of range");
    const auto& pool = by_domain_[static_cast<size_t>(d)];
    idx.push_back(pool[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))]);
  }
  return gather(idx);
}

Batcher::Batch Batcher::sample_random(int count, Rng& rng) const {
  std::vector<int> idx;
  const int n = data_->images.dim(0);
  for (int i = 0; i < count; ++i) idx.push_back(rng.uniform_int(0, n - 1));
  return gather(idx);
}

// ---------------------------------------------------------------- TrainState

std::vector<Param*> TrainState::gen_params() const {
  std::vector<Param*> p;
  gen->collect(p);
  return p;
}

TrainState make_train_state(const TrainConfig& cfg) {
  cfg.validate();
  TrainState st;
  st.cfg = cfg;
  st.rng = Rng(cfg.seed);
  Rng init = st.rng.split();
  st.enc = std::make_unique<StyleEncoder>(cfg.net, init);
  st.map = std::make_unique<MappingNetwork>(cfg.net, init);
  st.gen = std::make_unique<Generator>(cfg.net, init);
  st.disc = std::make_unique<Discriminator>(cfg.net, init);
  std::vector<Param*> pe, pf, pg, pd;
  st.enc->collect(pe);
  st.map->collect(pf);
  st.gen->collect(pg);
  st.disc->collect(pd);
  st.opt_e = std::make_unique<Adam>(pe, cfg.lr_e, cfg.adam_beta1, cfg.adam_beta2);
  st.opt_f = std::make_unique<Adam>(pf, cfg.lr_f, cfg.adam_beta1, cfg.adam_beta2);
  st.opt_g = std::make_unique<Adam>(pg, cfg.lr_g, cfg.adam_beta1, cfg.adam_beta2);
  st.opt_d = std::make_unique<Adam>(pd, cfg.lr_d, cfg.adam_beta1, cfg.adam_beta2);
  if (cfg.ema_decay > 0.0f) st.ema = std::make_unique<EmaCopy>(pg, cfg.ema_decay);
  if (cfg.setting == Setting::Tunit)
    st.queue = std::make_unique<NegativeQueue>(cfg.queue_capacity, cfg.tau);
  return st;
}

// ---------------------------------------------------------------- training step

namespace {

struct StepPlan {
  std::vector<int> y;        // source labels (ground truth or pseudo)
  std::vector<int> y_tgt;    // target domain per sample
  std::vector<int> y_mix;    // mixup partner domain, != y
  Tensor ref1_x, ref2_x, refmix_x;
  Tensor z1, z2, zmix;       // noise for odd steps
  bool from_noise = false;
};

LossRecord step_impl(TrainState& st, const Batcher::Batch& batch, Batcher& batcher,
                     bool tunit) {
  const TrainConfig& cfg = st.cfg;
  const int B = batch.x.dim(0);
  const int m = cfg.net.num_domains;
  const int64_t step = st.step;
  LossRecord rec;
  rec.step = step;
  auto& rng = st.rng;

  const float lam_ds_now =
      cfg.lambda_ds *
      std::max(0.0f, 1.0f - static_cast<float>(step) / static_cast<float>(cfg.total_steps));
  const bool use_mix = cfg.lambda_adv_mix > 0.0f || cfg.lambda_cls_mix > 0.0f;
  const bool need_s2 = lam_ds_now > 0.0f || cfg.lambda_shr > 0.0f;

  StepPlan plan;
  plan.from_noise = style_source_for_step(step) == StyleSource::FromNoise;

  // ----- plan: labels, targets, references, noise
  if (tunit) {
    Tape t;
    DiscOutput d0 = st.disc->forward(batch.x, t);
    plan.y = assign_pseudo_labels(softmax_rows(d0.cls_logits));
  } else {
    plan.y = batch.y;
  }
  if (tunit) {
    Batcher::Batch r1 = batcher.sample_random(B, rng);
    Batcher::Batch r2 = batcher.sample_random(B, rng);
    plan.ref1_x = r1.x;
    plan.ref2_x = r2.x;
    {
      Tape t;
      plan.y_tgt = assign_pseudo_labels(softmax_rows(st.disc->forward(r1.x, t).cls_logits));
    }
    if (use_mix) {
      Batcher::Batch rm = batcher.sample_random(B, rng);
      plan.refmix_x = rm.x;
      Tape t;
      plan.y_mix = assign_pseudo_labels(softmax_rows(st.disc->forward(rm.x, t).cls_logits));
    }
  } else {
    for (int i = 0; i < B; ++i) plan.y_tgt.push_back(rng.uniform_int(0, m - 1));
    Batcher::Batch r1 = batcher.sample_from_domains(plan.y_tgt, rng);
    Batcher::Batch r2 = batcher.sample_from_domains(plan.y_tgt, rng);
    plan.ref1_x = r1.x;
    plan.ref2_x = r2.x;
    if (use_mix) {
      for (int i = 0; i < B; ++i)
        plan.y_mix.push_back((plan.y[static_cast<size_t>(i)] + 1 + rng.uniform_int(0, m - 2)) % m);
      plan.refmix_x = batcher.sample_from_domains(plan.y_mix, rng).x;
    }
  }
  if (plan.from_noise) {
    plan.z1 = Tensor({B, cfg.net.latent_dim});
    plan.z2 = Tensor({B, cfg.net.latent_dim});
    rng.fill_normal(plan.z1);
    rng.fill_normal(plan.z2);
    if (use_mix) {
      plan.zmix = Tensor({B, cfg.net.latent_dim});
      rng.fill_normal(plan.zmix);
    }
  }
  std::vector<double> mix_alphas;
  if (use_mix)
    for (int i = 0; i < B; ++i) mix_alphas.push_back(sample_alpha(2.0, rng));

  auto style_forward = [&](const Tensor& ref_x, const Tensor& z, Tape& tape) {
    return plan.from_noise ? st.map->forward(z, tape) : st.enc->forward(ref_x, tape);
  };
  auto style_backward = [&](const Tensor& gs, Tape& tape) {
    if (plan.from_noise)
      st.map->backward(gs, tape);
    else
      st.enc->backward(gs, tape);
  };

  // untaped style codes and mixup styles for the D phase
  Tensor s1_d, smix_style_d;
  {
    Tape t;
    s1_d = style_forward(plan.ref1_x, plan.z1, t);
  }
  if (use_mix) {
    Tape t;
    smix_style_d = style_forward(plan.refmix_x, plan.zmix, t);
  }

  // mixup partner labels must differ from the source labels; with pseudo
  // labels that can fail per sample, so collect the valid subset
  std::vector<int> mix_valid;
  if (use_mix)
    for (int i = 0; i < B; ++i)
      if (plan.y_mix[static_cast<size_t>(i)] != plan.y[static_cast<size_t>(i)])
        mix_valid.push_back(i);
  const bool cls_mix_active = cfg.lambda_cls_mix > 0.0f && !mix_valid.empty();

  auto cls_mix_loss = [&](const Tensor& cls_logits, Tensor& g_logits_out) {
    // subset rows with i != j
    const int k = static_cast<int>(mix_valid.size());
    Tensor sub({k, m});
    std::vector<int> li(static_cast<size_t>(k)), lj(static_cast<size_t>(k));
    std::vector<double> la(static_cast<size_t>(k));
    for (int r = 0; r < k; ++r) {
      const int i = mix_valid[static_cast<size_t>(r)];
      for (int c = 0; c < m; ++c) sub.at2(r, c) = cls_logits.at2(i, c);
      li[static_cast<size_t>(r)] = plan.y[static_cast<size_t>(i)];
      lj[static_cast<size_t>(r)] = plan.y_mix[static_cast<size_t>(i)];
      la[static_cast<size_t>(r)] = mix_alphas[static_cast<size_t>(i)];
    }
    Tensor probs = sigmoid(sub);
    Tensor gp;
    LossValue lv = domain_mixup_cls_loss(probs, li, lj, la, &gp);
    Tensor gl = sigmoid_grad_to_logits(gp, probs);
    g_logits_out = Tensor(cls_logits.shape());
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < m; ++c)
        g_logits_out.at2(mix_valid[static_cast<size_t>(r)], c) = gl.at2(r, c);
    return lv;
  };

  // =====================================================  discriminator update
  st.opt_d->zero_grad();

  Tensor x_fake_d;
  {
    Tape t;
    x_fake_d = st.gen->forward(batch.x, s1_d, t);
  }
  Tensor x_mix_d;
  if (use_mix) {
    auto [img, draws] = build_mixed_translation(batch.x, smix_style_d, mix_alphas, *st.enc,
                                                *st.gen);
    x_mix_d = std::move(img);
  }

  {  // real pass: adversarial real side + domain classification (+ MI, tunit)
    Tape t_real, t_fake;
    DiscOutput o_real = st.disc->forward(batch.x, t_real);
    DiscOutput o_fake = st.disc->forward(x_fake_d, t_fake);
    Tensor g_rf_real, g_rf_fake;
    LossValue adv_d = adversarial_loss_d(o_real.rf, o_fake.rf, &g_rf_real, &g_rf_fake);
    check_term(adv_d.value, "adv_d", step);
    rec.terms.emplace_back("adv_d", adv_d.value);

    Tensor probs_real = sigmoid(o_real.cls_logits);
    Tensor g_probs;
    LossValue cls_d = domain_cls_loss_d(probs_real, plan.y, &g_probs);
    check_term(cls_d.value, "cls_d", step);
    rec.terms.emplace_back("cls_d", cls_d.value);
    Tensor g_cls = scaled(sigmoid_grad_to_logits(g_probs, probs_real), cfg.lambda_cls);

    if (tunit && cfg.lambda_mi > 0.0f) {
      // clustering head: maximize the mutual information of the joint
      // assignment of each image and its augmented copy
      Tensor x_aug = augment(batch.x, rng);
      Tape t_aug;
      DiscOutput o_aug = st.disc->forward(x_aug, t_aug);
      Tensor pa = softmax_rows(o_real.cls_logits);
      Tensor pb = softmax_rows(o_aug.cls_logits);
      Tensor joint = joint_probability_matrix(pa, pb);
      Tensor gj;
      LossValue mi = mi_loss(joint, &gj);
      check_term(mi.value, "mi", step);
      rec.terms.emplace_back("mi", mi.value);
      Tensor gpa(pa.shape()), gpb(pb.shape());
      for (int k = 0; k < B; ++k)
        for (int i = 0; i < m; ++i) {
          double sa = 0.0, sb = 0.0;
          for (int j = 0; j < m; ++j) {
            sa += static_cast<double>(gj.at2(i, j)) * pb.at2(k, j);
            sb += static_cast<double>(gj.at2(j, i)) * pa.at2(k, j);
          }
          gpa.at2(k, i) = static_cast<float>(sa / B);
          gpb.at2(k, i) = static_cast<float>(sb / B);
        }
      // maximize: descend on the negated gradient
      g_cls += scaled(softmax_grad_to_logits(gpa, pa), -cfg.lambda_mi);
      Tensor g_aug_cls = scaled(softmax_grad_to_logits(gpb, pb), -cfg.lambda_mi);
      Tensor zero_rf({B});
      st.disc->backward(zero_rf, g_aug_cls, t_aug);
    }

    st.disc->backward(scaled(g_rf_real, -1.0f), g_cls, t_real);  // adv_d is maximized
    Tensor zero_cls({B, m});
    st.disc->backward(scaled(g_rf_fake, -1.0f), zero_cls, t_fake);
  }

  {  // R1 gradient penalty on reals
    const double r1 = st.disc->r1_penalty(batch.x, cfg.r1_gamma);
    check_term(r1, "r1", step);
    rec.terms.emplace_back("r1", r1);
  }

  if (use_mix) {  // mixed translations treated as fakes + soft-label routing
    Tape t_mix;
    DiscOutput o_mix = st.disc->forward(x_mix_d, t_mix);
    Tensor g_rf_mix(o_mix.rf.shape());
    if (cfg.lambda_adv_mix > 0.0f) {
      Tensor g;
      LossValue adv_mix_d = adversarial_mixup_loss_d(o_mix.rf, &g);
      check_term(adv_mix_d.value, "adv_mix_d", step);
      rec.terms.emplace_back("adv_mix_d", adv_mix_d.value);
      g_rf_mix = scaled(g, -cfg.lambda_adv_mix);  // maximized term
    }
    Tensor g_cls_mix({B, m});
    if (cls_mix_active) {
      Tensor gl;
      LossValue cm = cls_mix_loss(o_mix.cls_logits, gl);
      check_term(cm.value, "cls_mix_d", step);
      rec.terms.emplace_back("cls_mix_d", cm.value);
      g_cls_mix = scaled(gl, cfg.lambda_cls_mix);
    }
    st.disc->backward(g_rf_mix, g_cls_mix, t_mix);
  }

  st.opt_d->step();

  // ==================================================  generator/encoder/mapper
  st.opt_g->zero_grad();
  st.opt_e->zero_grad();
  st.opt_f->zero_grad();

  // taped style sources
  Tape t_s1, t_s2;
  Tensor s1 = style_forward(plan.ref1_x, plan.z1, t_s1);
  Tensor s2;
  if (need_s2) s2 = style_forward(plan.ref2_x, plan.z2, t_s2);

  Tape t_g1;
  Tensor x_fake = st.gen->forward(batch.x, s1, t_g1);

  // adversarial + target-domain classification through a frozen discriminator
  Tensor g_xfake(x_fake.shape());
  {
    Tape t_df;
    DiscOutput o = st.disc->forward(x_fake, t_df);
    Tensor g_rf;
    LossValue adv_g = adversarial_loss_g(o.rf, &g_rf);
    check_term(adv_g.value, "adv_g", step);
    rec.terms.emplace_back("adv_g", adv_g.value);
    Tensor probs = sigmoid(o.cls_logits);
    Tensor g_probs;
    LossValue cls_g = domain_cls_loss_g(probs, plan.y_tgt, &g_probs);
    check_term(cls_g.value, "cls_g", step);
    rec.terms.emplace_back("cls_g", cls_g.value);
    Tensor g_cls = scaled(sigmoid_grad_to_logits(g_probs, probs), cfg.lambda_cls);
    ParamGradScope freeze;
    g_xfake += st.disc->backward(g_rf, g_cls, t_df);
  }

  // style reconstruction (and, unsupervised, the generator-side contrastive
  // pull toward the conditioning style)
  Tensor gs1({B, cfg.net.style_dim});
  {
    Tape t_erec;
    Tensor s_rec = st.enc->forward(x_fake, t_erec);
    Tensor g_starget, g_srec;
    LossValue sty = style_reconstruction_loss(s1, s_rec, &g_starget, &g_srec);
    check_term(sty.value, "sty", step);
    rec.terms.emplace_back("sty", sty.value);
    Tensor g_srec_total = scaled(g_srec, cfg.lambda_sty);
    gs1 += scaled(g_starget, cfg.lambda_sty);

    if (tunit && cfg.lambda_gen_contrast > 0.0f && st.queue->size() > 0) {
      double acc = 0.0;
      for (int i = 0; i < B; ++i) {
        double na, np;
        std::vector<float> a = normalize_vec(tensor_row(s_rec, i), na);
        std::vector<float> p = normalize_vec(tensor_row(s1, i), np);
        std::vector<float> ga, gp;
        LossValue lv = style_contrastive_loss_g(a, p, *st.queue, &ga, &gp);
        acc += lv.value / B;
        normalize_backward(a, na, ga, cfg.lambda_gen_contrast / B, g_srec_total, i);
        normalize_backward(p, np, gp, cfg.lambda_gen_contrast / B, gs1, i);
      }
      check_term(acc, "con_g", step);
      rec.terms.emplace_back("con_g", acc);
    }
    g_xfake += st.enc->backward(g_srec_total, t_erec);
  }

  // diversity-sensitive term (maximized, decaying weight)
  Tensor x_fake2;
  Tape t_g2;
  Tensor gs2({B, cfg.net.style_dim});
  if (lam_ds_now > 0.0f) {
    x_fake2 = st.gen->forward(batch.x, s2, t_g2);
    Tensor ga, gb;
    LossValue ds = diversity_sensitive_loss(x_fake, x_fake2, &ga, &gb);
    check_term(ds.value, "ds", step);
    rec.terms.emplace_back("ds", ds.value);
    g_xfake += scaled(ga, -lam_ds_now);
    st.gen->backward(scaled(gb, -lam_ds_now), t_g2, gs2);
  }

  // cycle consistency; the source-style pass also feeds the identity
  // reconstruction in the unsupervised setting
  Tape t_esrc;
  Tensor s_src = st.enc->forward(batch.x, t_esrc);
  Tensor gs_src({B, cfg.net.style_dim});
  {
    Tape t_gcyc;
    Tensor x_cyc = st.gen->forward(x_fake, s_src, t_gcyc);
    Tensor g_cyc;
    LossValue cyc = cycle_consistency_loss(batch.x, x_cyc, nullptr, &g_cyc);
    check_term(cyc.value, "cyc", step);
    rec.terms.emplace_back("cyc", cyc.value);
    g_xfake += st.gen->backward(scaled(g_cyc, cfg.lambda_cyc), t_gcyc, gs_src);
  }
  if (tunit && cfg.lambda_img_rec > 0.0f) {
    Tape t_gid;
    Tensor x_id = st.gen->forward(batch.x, s_src, t_gid);
    Tensor g_id;
    LossValue ir = image_reconstruction_loss(batch.x, x_id, nullptr, &g_id);
    check_term(ir.value, "img_rec", step);
    rec.terms.emplace_back("img_rec", ir.value);
    st.gen->backward(scaled(g_id, cfg.lambda_img_rec), t_gid, gs_src);
  }
  st.enc->backward(gs_src, t_esrc);

  // latent shrinkage over the shuffled in-batch pairing of this step's codes
  if (cfg.lambda_shr > 0.0f) {
    const int p = 2 * B;
    const int d = cfg.net.style_dim;
    Tensor all({p, d});
    for (int i = 0; i < B; ++i)
      for (int j = 0; j < d; ++j) {
        all.at2(i, j) = s1.at2(i, j);
        all.at2(B + i, j) = s2.at2(i, j);
      }
    std::vector<int> perm = rng.permutation(p);
    Tensor sa({p, d}), sb({p, d});
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < d; ++j) {
        sa.at2(i, j) = all.at2(perm[static_cast<size_t>(i)], j);
        sb.at2(i, j) = all.at2(perm[static_cast<size_t>((i + 1) % p)], j);
      }
    Tensor ga, gb;
    LossValue shr = shrinkage_loss(sa, sb, &ga, &gb);
    check_term(shr.value, "shr", step);
    rec.terms.emplace_back("shr", shr.value);
    Tensor gall({p, d});
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < d; ++j) {
        gall.at2(perm[static_cast<size_t>(i)], j) += cfg.lambda_shr * ga.at2(i, j);
        gall.at2(perm[static_cast<size_t>((i + 1) % p)], j) += cfg.lambda_shr * gb.at2(i, j);
      }
    for (int i = 0; i < B; ++i)
      for (int j = 0; j < d; ++j) {
        gs1.at2(i, j) += gall.at2(i, j);
        gs2.at2(i, j) += gall.at2(B + i, j);
      }
  }

  // mixup generator side
  if (use_mix) {
    Tape t_emix;
    Tensor s_i = st.enc->forward(batch.x, t_emix);
    Tape t_sjm;
    Tensor s_jm = style_forward(plan.refmix_x, plan.zmix, t_sjm);
    Tensor s_mix = mix_rows(s_i, s_jm, mix_alphas);
    Tape t_gmix;
    Tensor x_mixg = st.gen->forward(batch.x, s_mix, t_gmix);
    Tape t_dmix;
    DiscOutput o = st.disc->forward(x_mixg, t_dmix);
    Tensor g_rf({B});
    if (cfg.lambda_adv_mix > 0.0f) {
      Tensor g;
      LossValue am = adversarial_mixup_loss_g(o.rf, &g);
      check_term(am.value, "adv_mix_g", step);
      rec.terms.emplace_back("adv_mix_g", am.value);
      g_rf = scaled(g, cfg.lambda_adv_mix);
    }
    Tensor g_cls({B, m});
    if (cls_mix_active) {
      Tensor gl;
      LossValue cm = cls_mix_loss(o.cls_logits, gl);
      check_term(cm.value, "cls_mix_g", step);
      rec.terms.emplace_back("cls_mix_g", cm.value);
      g_cls = scaled(gl, cfg.lambda_cls_mix);
    }
    Tensor g_img;
    {
      ParamGradScope freeze;
      g_img = st.disc->backward(g_rf, g_cls, t_dmix);
    }
    Tensor gsm({B, cfg.net.style_dim});
    st.gen->backward(g_img, t_gmix, gsm);
    Tensor gsi(gsm.shape()), gsj(gsm.shape());
    for (int i = 0; i < B; ++i) {
      const float a = static_cast<float>(mix_alphas[static_cast<size_t>(i)]);
      for (int j = 0; j < cfg.net.style_dim; ++j) {
        gsi.at2(i, j) = (1.0f - a) * gsm.at2(i, j);
        gsj.at2(i, j) = a * gsm.at2(i, j);
      }
    }
    st.enc->backward(gsi, t_emix);
    style_backward(gsj, t_sjm);
  }

  // unsupervised encoder-side contrastive term
  Tensor s_anchor;
  if (tunit) {
    Tape t_ea, t_ep;
    s_anchor = st.enc->forward(batch.x, t_ea);
    if (cfg.lambda_style_contrast > 0.0f && st.queue->size() > 0) {
      Tensor x_aug = augment(batch.x, rng);
      Tensor s_pos = st.enc->forward(x_aug, t_ep);
      Tensor ga_rows(s_anchor.shape()), gp_rows(s_pos.shape());
      double acc = 0.0;
      for (int i = 0; i < B; ++i) {
        double na, np;
        std::vector<float> a = normalize_vec(tensor_row(s_anchor, i), na);
        std::vector<float> p = normalize_vec(tensor_row(s_pos, i), np);
        std::vector<float> ga, gp;
        LossValue lv = contrastive_style_loss_e(a, p, *st.queue, &ga, &gp);
        acc += lv.value / B;
        normalize_backward(a, na, ga, cfg.lambda_style_contrast / B, ga_rows, i);
        normalize_backward(p, np, gp, cfg.lambda_style_contrast / B, gp_rows, i);
      }
      check_term(acc, "con_e", step);
      rec.terms.emplace_back("con_e", acc);
      st.enc->backward(ga_rows, t_ea);
      st.enc->backward(gp_rows, t_ep);
    }
  }

  // remaining image-path gradients and the style-source backward passes
  st.gen->backward(g_xfake, t_g1, gs1);
  style_backward(gs1, t_s1);
  if (need_s2) {
    bool nonzero = false;
    for (int64_t i = 0; i < gs2.size() && !nonzero; ++i) nonzero = gs2[i] != 0.0f;
    if (nonzero) style_backward(gs2, t_s2);
  }

  st.opt_g->step();
  st.opt_e->step();
  st.opt_f->step();
  if (st.ema) st.ema->update();
  if (tunit) st.queue->push(s_anchor);

  ++st.step;
  return rec;
}

}  // namespace

LossRecord train_step_mmuit(TrainState& state, const Batcher::Batch& batch, Batcher& batcher) {
  return step_impl(state, batch, batcher, false);
}

LossRecord train_step_tunit(TrainState& state, const Batcher::Batch& batch, Batcher& batcher) {
  return step_impl(state, batch, batcher, true);
}

std::vector<LossRecord> train(TrainState& state, const SplitData& data,
                              const std::string& out_dir, int log_every) {
  Batcher batcher(data, state.cfg.batch_size, state.cfg.seed);
  std::vector<LossRecord> records;
  std::ofstream losses;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    losses.open(fs::path(out_dir) / "losses.tsv");
  }
  const bool tunit = state.cfg.setting == Setting::Tunit;
  while (state.step < state.cfg.total_steps) {
    Batcher::Batch batch = batcher.next();
    LossRecord rec = tunit ? train_step_tunit(state, batch, batcher)
                           : train_step_mmuit(state, batch, batcher);
    if (losses.is_open())
      for (const auto& [k, v] : rec.terms)
        losses << rec.step << '\t' << k << '\t' << fmt_val(v) << '\n';
    if (log_every > 0 && rec.step % log_every == 0) {
      std::string line = "step " + std::to_string(rec.step);
      for (const auto& [k, v] : rec.terms) line += " " + k + "=" + fmt_val(v);
      std::fprintf(stderr, "%s\n", line.c_str());
    }
    records.push_back(std::move(rec));
  }
  if (!out_dir.empty()) save_checkpoint(state, (fs::path(out_dir) / "checkpoint.bin").string());
  return records;
}

// ---------------------------------------------------------------- checkpoints

namespace {
constexpr char kCkptMagic[] = "SMCKPT1\n";

void write_u64(std::ostream& os, uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint64_t read_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw std::runtime_error("checkpoint: truncated");
  return v;
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  os.write(kCkptMagic, sizeof(kCkptMagic) - 1);
  const std::string cfg_text = serialize_config(state.cfg);
  write_u64(os, cfg_text.size());
  os.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
  write_u64(os, static_cast<uint64_t>(state.step));
  std::vector<Param*> pe, pf, pg, pd;
  state.enc->collect(pe);
  state.map->collect(pf);
  state.gen->collect(pg);
  state.disc->collect(pd);
  save_params(os, "E", pe);
  save_params(os, "F", pf);
  save_params(os, "G", pg);
  save_params(os, "D", pd);
  const uint64_t has_ema = state.ema ? 1 : 0;
  write_u64(os, has_ema);
  if (state.ema) {
    const auto& shadow = const_cast<TrainState&>(state).ema->shadow();
    write_u64(os, shadow.size());
    for (const Tensor& t : shadow)
      os.write(reinterpret_cast<const char*>(t.data()),
               static_cast<std::streamsize>(t.size() * sizeof(float)));
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[sizeof(kCkptMagic) - 1];
  is.read(magic, sizeof(magic));
  if (!is || std::string(magic, sizeof(magic)) != std::string(kCkptMagic, sizeof(magic)))
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  const uint64_t cfg_len = read_u64(is);
  std::string cfg_text(cfg_len, '\0');
  is.read(cfg_text.data(), static_cast<std::streamsize>(cfg_len));
  TrainState state = make_train_state(parse_config(cfg_text));
  state.step = static_cast<int64_t>(read_u64(is));
  std::vector<Param*> pe, pf, pg, pd;
  state.enc->collect(pe);
  state.map->collect(pf);
  state.gen->collect(pg);
  state.disc->collect(pd);
  load_params(is, "E", pe);
  load_params(is, "F", pf);
  load_params(is, "G", pg);
  load_params(is, "D", pd);
  const uint64_t has_ema = read_u64(is);
  if (has_ema) {
    if (!state.ema) throw std::runtime_error("load_checkpoint: EMA present but disabled in config");
    auto& shadow = state.ema->shadow();
    const uint64_t n = read_u64(is);
    if (n != shadow.size()) throw std::runtime_error("load_checkpoint: EMA tensor count mismatch");
    for (Tensor& t : shadow) {
      is.read(reinterpret_cast<char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(float)));
      if (!is) throw std::runtime_error("load_checkpoint: truncated EMA payload");
    }
  }
  return state;
}

// ---------------------------------------------------------------- evaluation

Tensor EvalContext::encode(const Tensor& x) const {
  Tape t;
  return enc->forward(x, t);
}

Tensor EvalContext::generate(const Tensor& x, const Tensor& s) const {
  Tensor src = x;
  const int k = s.dim(0);
  if (x.dim(0) == 1 && k > 1) {
    src = Tensor({k, x.dim(1), x.dim(2), x.dim(3)});
    const int64_t sz = static_cast<int64_t>(x.dim(1)) * x.dim(2) * x.dim(3);
    for (int i = 0; i < k; ++i) std::copy(x.data(), x.data() + sz, src.data() + i * sz);
  }
  Tape t;
  return gen->forward(src, s, t);
}

std::vector<int> EvalContext::classify(const Tensor& x) const {
  Tape t;
  DiscOutput o = disc->forward(x, t);
  return assign_pseudo_labels(softmax_rows(o.cls_logits));
}

EvalContext make_eval_context(const TrainState& state) {
  EvalContext ctx;
  ctx.cfg = state.cfg;
  ctx.step = state.step;
  Rng init(0);
  ctx.enc = std::make_unique<StyleEncoder>(state.cfg.net, init);
  ctx.map = std::make_unique<MappingNetwork>(state.cfg.net, init);
  ctx.gen = std::make_unique<Generator>(state.cfg.net, init);
  ctx.disc = std::make_unique<Discriminator>(state.cfg.net, init);
  auto copy_params = [](const auto& from_net, const auto& to_net) {
    std::vector<Param*> src, dst;
    from_net->collect(src);
    to_net->collect(dst);
    std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
    save_params(buf, "x", src);
    load_params(buf, "x", dst);
  };
  copy_params(state.enc, ctx.enc);
  copy_params(state.map, ctx.map);
  copy_params(state.gen, ctx.gen);
  copy_params(state.disc, ctx.disc);
  if (state.ema) {
    std::vector<Param*> pg;
    ctx.gen->collect(pg);
    const_cast<TrainState&>(state).ema->write_to(pg);
  }
  return ctx;
}

EvalContext load_eval_context(const std::string& checkpoint_path) {
  TrainState st = load_checkpoint(checkpoint_path);
  return make_eval_context(st);
}

double EvalReport::metric(const std::string& name) const {
  for (const auto& [k, v] : metrics)
    if (k == name) return v;
  throw std::out_of_range("EvalReport: no metric '" + name + "'");
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  for (const auto& [k, v] : metrics) out << k << '\t' << fmt_val(v) << '\n';
  out << "\n# provenance\n";
  for (const auto& [k, v] : provenance) out << k << '=' << v << '\n';
  return out.str();
}

void EvalReport::write(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("EvalReport: cannot open " + path);
  os << to_text();
}

std::unique_ptr<PerceptualEmbedder> build_eval_phi(const SplitData& train, int num_domains,
                                                   int steps, uint64_t seed) {
  Rng rng(seed ^ 0x70686921ULL);
  auto phi = std::make_unique<PerceptualEmbedder>(train.images.dim(1), train.images.dim(2),
                                                  num_domains, rng);
  const int batch = std::min(32, train.images.dim(0));
  train_domain_classifier(*phi, train.images, train.labels, steps, batch, 1e-3f, rng);
  return phi;
}

namespace {

Tensor single_image(const Tensor& batch, int i) {
  const int c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  const int64_t sz = static_cast<int64_t>(c) * h * w;
  Tensor out({1, c, h, w});
  std::copy(batch.data() + i * sz, batch.data() + (i + 1) * sz, out.data());
  return out;
}

Tensor stack_features(const std::vector<Tensor>& rows) {
  const int d = rows.front().dim(1);
  Tensor out({static_cast<int>(rows.size()) * rows.front().dim(0), d});
  int64_t off = 0;
  for (const Tensor& r : rows) {
    std::copy(r.data(), r.data() + r.size(), out.data() + off);
    off += r.size();
  }
  return out;
}

bool wants(const EvalParams& p, const std::string& name) {
  return std::find(p.metrics.begin(), p.metrics.end(), name) != p.metrics.end();
}

}  // namespace

EvalReport run_interpolation_eval(const EvalContext& ctx, const SplitData& test,
                                  const SplitData& train, const EvalParams& params) {
  const int m = ctx.cfg.net.num_domains;
  const int n_test = test.images.dim(0);
  std::vector<std::vector<int>> by_domain(static_cast<size_t>(m));
  for (int i = 0; i < n_test; ++i) {
    if (test.labels[static_cast<size_t>(i)] >= m)
      throw std::invalid_argument("run_interpolation_eval: label out of range");
    by_domain[static_cast<size_t>(test.labels[static_cast<size_t>(i)])].push_back(i);
  }
  for (int d = 0; d < m; ++d)
    if (by_domain[static_cast<size_t>(d)].empty())
      throw std::invalid_argument("run_interpolation_eval: domain " + std::to_string(d) +
                                  " missing from manifest");
  if (params.t_steps < 2) throw std::invalid_argument("run_interpolation_eval: T must be >= 2");

  auto phi = build_eval_phi(train, m, params.phi_train_steps, params.seed);
  Rng rng(params.seed);

  auto pick = [&](const std::vector<int>& pool, Rng& r) {
    return pool[static_cast<size_t>(r.uniform_int(0, static_cast<int>(pool.size()) - 1))];
  };
  const int d_s = ctx.cfg.net.style_dim;

  auto gen_fn = [&](const Tensor& src, const Tensor& styles) {
    return ctx.generate(src, styles);
  };

  EvalReport report;

  if (wants(params, "fid")) {
    double fid_sum = 0.0;
    int fid_pairs = 0;
    for (int di = 0; di < m; ++di)
      for (int dj = 0; dj < m; ++dj) {
        if (di == dj) continue;
        // real features of the target domain
        const auto& tgt_pool = by_domain[static_cast<size_t>(dj)];
        Tensor real({static_cast<int>(tgt_pool.size()), test.images.dim(1), test.images.dim(2),
                     test.images.dim(3)});
        const int64_t sz =
            static_cast<int64_t>(test.images.dim(1)) * test.images.dim(2) * test.images.dim(3);
        for (size_t k = 0; k < tgt_pool.size(); ++k)
          std::copy(test.images.data() + tgt_pool[k] * sz,
                    test.images.data() + (tgt_pool[k] + 1) * sz,
                    real.data() + static_cast<int64_t>(k) * sz);
        Tensor real_feats = phi->pooled_features(real);
        std::vector<Tensor> gen_feats;
        const auto& src_pool = by_domain[static_cast<size_t>(di)];
        const int n_src = std::min<int>(params.num_sources, static_cast<int>(src_pool.size()));
        for (int s = 0; s < n_src; ++s) {
          Tensor src = single_image(test.images, pick(src_pool, rng));
          Tensor ref1 = single_image(test.images, pick(src_pool, rng));
          Tensor ref2 = single_image(test.images, pick(tgt_pool, rng));
          Tensor sa = ctx.encode(ref1), sb = ctx.encode(ref2);
          Tensor codes({params.t_steps, d_s});
          for (int t = 0; t < params.t_steps; ++t) {
            const double a = static_cast<double>(t) / (params.t_steps - 1);
            for (int j = 0; j < d_s; ++j)
              codes.at2(t, j) =
                  static_cast<float>((1.0 - a) * sa.at2(0, j) + a * sb.at2(0, j));
          }
          Tensor frames = ctx.generate(src, codes);
          gen_feats.push_back(phi->pooled_features(frames));
        }
        const double fid =
            frechet_distance(gaussian_stats(real_feats), gaussian_stats(stack_features(gen_feats)));
        report.metrics.emplace_back(
            "fid_" + std::to_string(di) + "to" + std::to_string(dj), fid);
        fid_sum += fid;
        ++fid_pairs;
      }
    report.metrics.emplace_back("fid", fid_sum / fid_pairs);
  }

  // shared source pool for the smoothness/diversity metrics
  std::vector<Tensor> sources;
  for (int s = 0; s < std::min(params.num_sources, n_test); ++s)
    sources.push_back(single_image(test.images, rng.uniform_int(0, n_test - 1)));

  if (wants(params, "p2")) {
    auto triplets = [&](Rng& r) {
      Tensor out({3, d_s});
      for (int k = 0; k < 3; ++k) {
        Tensor s = ctx.encode(single_image(test.images, r.uniform_int(0, n_test - 1)));
        for (int j = 0; j < d_s; ++j) out.at2(k, j) = s.at2(0, j);
      }
      return out;
    };
    P2Config cfg;
    cfg.num_triplets = params.p2_triplets;
    cfg.eps = params.p2_eps;
    cfg.seed = rng.split().engine()();
    report.metrics.emplace_back("p2", p2_score(gen_fn, triplets, sources, *phi, cfg));
  }

  if (wants(params, "p2eq")) {
    std::vector<std::vector<Tensor>> sequences;
    Rng seq_rng = rng.split();
    const int n_seq = std::min(50, std::max(4, params.num_sources / 4));
    for (int s = 0; s < n_seq; ++s) {
      const int di = seq_rng.uniform_int(0, m - 1);
      int dj = seq_rng.uniform_int(0, m - 1);
      if (m > 1 && dj == di) dj = (dj + 1) % m;
      Tensor src = single_image(test.images, pick(by_domain[static_cast<size_t>(di)], seq_rng));
      Tensor sa = ctx.encode(
          single_image(test.images, pick(by_domain[static_cast<size_t>(di)], seq_rng)));
      Tensor sb = ctx.encode(
          single_image(test.images, pick(by_domain[static_cast<size_t>(dj)], seq_rng)));
      Tensor codes({params.t_steps, d_s});
      for (int t = 0; t < params.t_steps; ++t) {
        const double a = static_cast<double>(t) / (params.t_steps - 1);
        for (int j = 0; j < d_s; ++j)
          codes.at2(t, j) = static_cast<float>((1.0 - a) * sa.at2(0, j) + a * sb.at2(0, j));
      }
      Tensor frames = ctx.generate(src, codes);
      std::vector<Tensor> seq;
      for (int t = 0; t < params.t_steps; ++t) seq.push_back(single_image(frames, t));
      sequences.push_back(std::move(seq));
    }
    Rng draw_rng = rng.split();
    report.metrics.emplace_back(
        "p2eq", p2_equal_step(sequences, *phi, params.p2_eps, params.p2eq_draws, draw_rng));
  }

  if (wants(params, "ppl")) {
    auto pairs = [&](Rng& r) {
      Tensor out({2, d_s});
      for (int k = 0; k < 2; ++k) {
        Tensor s = ctx.encode(single_image(test.images, r.uniform_int(0, n_test - 1)));
        for (int j = 0; j < d_s; ++j) out.at2(k, j) = s.at2(0, j);
      }
      return out;
    };
    Rng ppl_rng = rng.split();
    report.metrics.emplace_back(
        "ppl", ppl_score(gen_fn, pairs, sources, *phi, params.ppl_eps, params.ppl_samples,
                         ppl_rng));
  }

  if (wants(params, "lpips")) {
    auto styles = [&](int domain, int count, Rng& r) {
      Tensor out({count, d_s});
      for (int k = 0; k < count; ++k) {
        Tensor s = ctx.encode(
            single_image(test.images, pick(by_domain[static_cast<size_t>(domain)], r)));
        for (int j = 0; j < d_s; ++j) out.at2(k, j) = s.at2(0, j);
      }
      return out;
    };
    Rng lp_rng = rng.split();
    // diversity over a thinned source pool to bound the pairwise cost
    std::vector<Tensor> lp_sources(sources.begin(),
                                   sources.begin() + std::min<size_t>(sources.size(), 32));
    report.metrics.emplace_back(
        "lpips", lpips_diversity(gen_fn, lp_sources, m, params.styles_per_domain, styles, *phi,
                                 lp_rng));
  }

  report.provenance.emplace_back("T", std::to_string(params.t_steps));
  report.provenance.emplace_back("num_sources", std::to_string(params.num_sources));
  report.provenance.emplace_back("protocol_reference", "num_sources=1000,T=20");
  report.provenance.emplace_back("styles_per_domain", std::to_string(params.styles_per_domain));
  report.provenance.emplace_back("p2_eps", fmt_val(params.p2_eps));
  report.provenance.emplace_back("ppl_eps", fmt_val(params.ppl_eps));
  report.provenance.emplace_back("phi_fingerprint", phi->fingerprint());
  report.provenance.emplace_back("phi_train_steps", std::to_string(params.phi_train_steps));
  report.provenance.emplace_back("seed", std::to_string(params.seed));
  report.provenance.emplace_back("checkpoint_step", std::to_string(ctx.step));
  return report;
}

// ---------------------------------------------------------------- grids

InterpolationGrid make_interpolation_grid(const EvalContext& ctx, const Tensor& source,
                                          const Tensor& ref_a, const Tensor& ref_b, int t) {
  if (t < 2) throw std::invalid_argument("make_interpolation_grid: T must be >= 2");
  InterpolationGrid grid;
  grid.source = source;
  grid.ref_a = ref_a;
  grid.ref_b = ref_b;
  Tensor sa = ctx.encode(ref_a);
  Tensor sb = ctx.encode(ref_b);
  const int d = sa.dim(1);
  StyleCode ca(sa.data(), sa.data() + d), cb(sb.data(), sb.data() + d);
  const std::vector<StyleCode> path = interpolate_path(ca, cb, t);
  for (const StyleCode& code : path) {
    Tensor s({1, d});
    std::copy(code.begin(), code.end(), s.data());
    grid.frames.push_back(ctx.generate(source, s));
  }
  return grid;
}

void write_grid_image(const InterpolationGrid& grid, const std::string& out_path) {
  const Tensor& f0 = grid.frames.front();
  const int c = f0.dim(1), h = f0.dim(2), w = f0.dim(3);
  const int cols = 3 + static_cast<int>(grid.frames.size());
  Tensor row({c, h, w * cols});
  auto blit = [&](const Tensor& img, int col) {
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          row.data()[(static_cast<int64_t>(ch) * h + y) * w * cols + col * w + x] =
              img.at4(0, ch, y, x);
  };
  blit(grid.source, 0);
  blit(grid.ref_a, 1);
  blit(grid.ref_b, 2);
  for (size_t i = 0; i < grid.frames.size(); ++i) blit(grid.frames[i], 3 + static_cast<int>(i));
  save_image(row, out_path);
}

void render_interpolation_grid(const EvalContext& ctx, const std::string& source_path,
                               const std::string& ref_a_path, const std::string& ref_b_path,
                               int t, const std::string& out_path) {
  const int size = ctx.cfg.net.img_size;
  InterpolationGrid grid =
      make_interpolation_grid(ctx, load_image(source_path, size), load_image(ref_a_path, size),
                              load_image(ref_b_path, size), t);
  write_grid_image(grid, out_path);
}

void intra_domain_grid(const EvalContext& ctx, const std::string& source_path,
                       const std::string& ref_a_path, const std::string& ref_b_path, int t,
                       const std::string& out_path) {
  const int size = ctx.cfg.net.img_size;
  Tensor ref_a = load_image(ref_a_path, size);
  Tensor ref_b = load_image(ref_b_path, size);
  const int da = ctx.classify(ref_a).front();
  const int db = ctx.classify(ref_b).front();
  if (da != db)
    throw std::invalid_argument("intra_domain_grid: references sit in different domains (" +
                                std::to_string(da) + " vs " + std::to_string(db) + ")");
  InterpolationGrid grid =
      make_interpolation_grid(ctx, load_image(source_path, size), ref_a, ref_b, t);
  write_grid_image(grid, out_path);
}

}  // namespace stylemix
