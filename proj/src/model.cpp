#include "tdan/model.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "tdan/corpus.hpp"

namespace tdan {

using ad::Var;
using nlohmann::json;

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kTdan: return "tdan";
    case Variant::kTdanF: return "tdan-f";
    case Variant::kTdanMinus: return "tdan-minus";
  }
  return "tdan";
}

Variant parse_variant(const std::string& s) {
  if (s == "tdan") return Variant::kTdan;
  if (s == "tdan-f") return Variant::kTdanF;
  if (s == "tdan-minus") return Variant::kTdanMinus;
  throw Error("unknown variant '" + s + "' (expected tdan|tdan-f|tdan-minus)");
}

void ModelConfig::validate() const {
  if (vocab_size <= 0) throw Error("model config: vocab_size must be positive");
  if (d_h <= 0 || d_l <= 0 || d_sp_max <= 0 || san_layers <= 0 || dspwan_layers <= 0)
    throw Error("model config: dimensions must be positive");
  if (d_h % 2 != 0) throw Error("model config: d_h must be even");
  if (heads <= 0 || d_h % heads != 0)
    throw Error("model config: d_h (" + std::to_string(d_h) +
                ") must be divisible by heads (" + std::to_string(heads) + ")");
  if (dropout < 0.0 || dropout >= 1.0)
    throw Error("model config: dropout must be in [0,1)");
}

std::vector<double> positional_encoding(int d_l, int d_h) {
  if (d_h % 2 != 0) throw Error("positional_encoding: d_h must be even");
  std::vector<double> pe(static_cast<std::size_t>(d_l) * d_h);
  for (int pos = 0; pos < d_l; ++pos) {
    for (int c = 0; c < d_h; ++c) {
      const int two_l = c % 2 == 0 ? c : c - 1;
      const double angle = pos / std::pow(10000.0, static_cast<double>(two_l) / d_h);
      pe[static_cast<std::size_t>(pos) * d_h + c] =
          c % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

Var TdanModel::reg_xavier(const std::string& name, int rows, int cols,
                          std::mt19937_64& rng) {
  params_.push_back(ad::xavier_parameter(name, rows, cols, rng));
  return params_.back().var;
}

Var TdanModel::reg_const(const std::string& name, int rows, int cols, double fill) {
  params_.push_back(ad::constant_parameter(name, rows, cols, fill));
  return params_.back().var;
}

TdanModel::EncoderLayer TdanModel::make_layer(const std::string& prefix,
                                              std::mt19937_64& rng) {
  const int d = config_.d_h;
  const int d_k = d / config_.heads;
  const int ffn = config_.resolved_ffn_dim();
  EncoderLayer layer;
  for (int h = 0; h < config_.heads; ++h) {
    const std::string hp = prefix + ".head" + std::to_string(h);
    layer.wq.push_back(reg_xavier(hp + ".wq", d_k, d, rng));
    layer.wk.push_back(reg_xavier(hp + ".wk", d_k, d, rng));
    layer.wv.push_back(reg_xavier(hp + ".wv", d_k, d, rng));
  }
  layer.wo = reg_xavier(prefix + ".wo", d, d, rng);
  layer.ln1_g = reg_const(prefix + ".ln1.gain", 1, d, 1.0);
  layer.ln1_b = reg_const(prefix + ".ln1.bias", 1, d, 0.0);
  layer.ff1 = reg_xavier(prefix + ".ff1", ffn, d, rng);
  layer.ff1_b = reg_const(prefix + ".ff1.bias", 1, ffn, 0.0);
  layer.ff2 = reg_xavier(prefix + ".ff2", d, ffn, rng);
  layer.ff2_b = reg_const(prefix + ".ff2.bias", 1, d, 0.0);
  layer.ln2_g = reg_const(prefix + ".ln2.gain", 1, d, 1.0);
  layer.ln2_b = reg_const(prefix + ".ln2.bias", 1, d, 0.0);
  return layer;
}

MlpAttentionHead TdanModel::make_head(const std::string& prefix, std::mt19937_64& rng) {
  const int d = config_.d_h;
  MlpAttentionHead head;
  head.q = reg_xavier(prefix + ".q", 1, d, rng);
  head.w = reg_xavier(prefix + ".w", 1, d, rng);
  head.w1 = reg_xavier(prefix + ".w1", d, d, rng);
  head.w2 = reg_xavier(prefix + ".w2", d, d, rng);
  return head;
}

TdanModel::TdanModel(const ModelConfig& config, const EmbeddingTable* pretrained)
    : config_(config) {
  config_.validate();
  std::mt19937_64 rng(mix_seed(config_.seed, "model-init"));

  embedding_ = reg_xavier("embedding", config_.vocab_size, config_.d_h, rng);
  if (pretrained) {
    if (pretrained->rows() != config_.vocab_size || pretrained->dim != config_.d_h)
      throw Error("model: embedding table is " + std::to_string(pretrained->rows()) +
                  "x" + std::to_string(pretrained->dim) + ", expected " +
                  std::to_string(config_.vocab_size) + "x" + std::to_string(config_.d_h));
    embedding_->value = pretrained->values;
  }
  // <pad> row stays zero; masked positions never receive gradient.
  for (int c = 0; c < config_.d_h; ++c) embedding_->at(Vocabulary::kPadId, c) = 0.0;

  positional_ = ad::from_values(config_.d_l, config_.d_h,
                                positional_encoding(config_.d_l, config_.d_h));

  for (int l = 0; l < config_.san_layers; ++l)
    san_.push_back(make_layer("san.layer" + std::to_string(l), rng));
  if (config_.variant != Variant::kTdanMinus) {
    for (int l = 0; l < config_.dspwan_layers; ++l)
      dspwan_.push_back(make_layer("dspwan.layer" + std::to_string(l), rng));
  }
  if (config_.variant == Variant::kTdan) {
    pool_san_ = make_head("pool.san", rng);
    pool_dsp_ = make_head("pool.dspwan", rng);
  }
  final_san_ = make_head("final.san", rng);
  if (config_.variant != Variant::kTdanMinus) final_dsp_ = make_head("final.dspwan", rng);

  const int fuse_in = config_.variant == Variant::kTdanMinus ? config_.d_h
                                                             : 2 * config_.d_h;
  w_f_ = reg_xavier("fusion.w", config_.d_h, fuse_in, rng);
  b_f_ = reg_const("fusion.bias", 1, config_.d_h, 0.0);
  w_c_ = reg_xavier("sentiment.w", 2, config_.d_h, rng);
  b_c_ = reg_const("sentiment.bias", 1, 2, 0.0);
  w_d_ = reg_xavier("domain.w", 2, config_.d_h, rng);
  b_d_ = reg_const("domain.bias", 1, 2, 0.0);
}

Var TdanModel::run_layer(const EncoderLayer& layer, const Var& x,
                         const Var& key_mask_row, bool training,
                         std::uint64_t dropout_seed, std::uint64_t& dropout_counter) {
  const int d_k = config_.d_h / config_.heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));

  std::vector<Var> head_outs;
  head_outs.reserve(config_.heads);
  for (int h = 0; h < config_.heads; ++h) {
    Var q = ad::matmul(x, layer.wq[h], false, true);  // n x d_k
    Var k = ad::matmul(x, layer.wk[h], false, true);
    Var v = ad::matmul(x, layer.wv[h], false, true);
    Var scores = ad::scale(ad::matmul(q, k, false, true), inv_sqrt_dk);  // n x n
    if (key_mask_row) scores = ad::add(scores, key_mask_row);
    Var attn = ad::softmax(scores, /*axis=*/1);
    attn = ad::dropout(attn, config_.dropout, training, dropout_seed + dropout_counter++);
    head_outs.push_back(ad::matmul(attn, v));
  }
  Var attn_out = ad::matmul(concat(head_outs, /*axis=*/1), layer.wo, false, true);
  Var x1 = ad::layer_norm(ad::add(x, attn_out), layer.ln1_g, layer.ln1_b);

  Var ff = ad::relu(ad::add(ad::matmul(x1, layer.ff1, false, true), layer.ff1_b));
  ff = ad::add(ad::matmul(ff, layer.ff2, false, true), layer.ff2_b);
  ff = ad::dropout(ff, config_.dropout, training, dropout_seed + dropout_counter++);
  return ad::layer_norm(ad::add(x1, ff), layer.ln2_g, layer.ln2_b);
}

Var TdanModel::run_stack(const std::vector<EncoderLayer>& stack, const Var& x,
                         const Var& key_mask_row, bool training,
                         std::uint64_t dropout_seed) {
  std::uint64_t counter = 0;
  Var cur = x;
  for (const auto& layer : stack)
    cur = run_layer(layer, cur, key_mask_row, training, dropout_seed, counter);
  return cur;
}

EncodedContext TdanModel::encode_semantics(const std::vector<int>& doc_tokens,
                                           bool training, std::uint64_t dropout_seed) {
  if (doc_tokens.empty()) throw Error("encode_semantics: empty document");
  EncodedContext ctx;
  const int n = std::min<int>(static_cast<int>(doc_tokens.size()), config_.d_l);
  ctx.n_real = n;
  ctx.tokens.assign(doc_tokens.begin(), doc_tokens.begin() + n);

  std::vector<int> padded = ctx.tokens;
  padded.resize(config_.d_l, Vocabulary::kPadId);

  ctx.key_mask_row = ad::make_tensor(1, config_.d_l);
  ctx.pool_mask_col = ad::make_tensor(config_.d_l, 1);
  for (int j = n; j < config_.d_l; ++j) {
    ctx.key_mask_row->value[j] = kNegInf;
    ctx.pool_mask_col->value[j] = kNegInf;
  }

  Var h = ad::add(ad::embedding_lookup(embedding_, padded), positional_);
  ctx.context = run_stack(san_, h, ctx.key_mask_row, training,
                          mix_seed(dropout_seed, "san"));
  return ctx;
}

EncodedContext TdanModel::encode_specific(const std::vector<int>& specific_tokens,
                                          bool training, std::uint64_t dropout_seed) {
  EncodedContext ctx;
  ctx.tokens = specific_tokens;
  if (ctx.tokens.empty()) ctx.tokens.push_back(Vocabulary::kSpecificTokenId);
  if (static_cast<int>(ctx.tokens.size()) > config_.d_sp_max)
    ctx.tokens.resize(config_.d_sp_max);
  ctx.n_real = static_cast<int>(ctx.tokens.size());

  // No positional embedding and no padding: the sequence is an unordered set.
  Var h = ad::embedding_lookup(embedding_, ctx.tokens);
  ctx.context = run_stack(dspwan_, h, nullptr, training,
                          mix_seed(dropout_seed, "dspwan"));
  return ctx;
}

std::pair<Var, Var> TdanModel::mlp_attention(const MlpAttentionHead& head,
                                             const Var& context,
                                             const Var& pool_mask_col) {
  Var cw = ad::matmul(context, head.w1, false, true);        // n x d
  Var qw = ad::matmul(head.q, head.w2, false, true);         // 1 x d
  Var scores = ad::matmul(ad::tanh_op(ad::add(cw, qw)), head.w, false, true);  // n x 1
  if (pool_mask_col) scores = ad::add(scores, pool_mask_col);
  Var alpha = ad::softmax(scores, /*axis=*/0);
  Var h = ad::matmul(alpha, context, /*trans_a=*/true);  // 1 x d
  return {h, alpha};
}

TdanModel::Pooled TdanModel::interactive_connect(const EncodedContext& sem,
                                                 const EncodedContext& spec) {
  Var s_pool = mlp_attention(pool_san_, sem.context, sem.pool_mask_col).first;
  Var p_pool = mlp_attention(pool_dsp_, spec.context, spec.pool_mask_col).first;

  // Cross-wiring: each branch's context is augmented with the other branch's
  // pooled summary. The literal self-wiring stays available for comparison.
  const Var& sem_extra = config_.interactive_self_wiring ? s_pool : p_pool;
  const Var& spec_extra = config_.interactive_self_wiring ? p_pool : s_pool;

  Var aug_sem = ad::concat({sem.context, sem_extra}, /*axis=*/0);
  Var aug_spec = ad::concat({spec.context, spec_extra}, /*axis=*/0);
  Var aug_sem_mask = ad::concat({sem.pool_mask_col, ad::make_tensor(1, 1)}, 0);

  Pooled out;
  std::tie(out.h_s, out.alpha_s) = mlp_attention(final_san_, aug_sem, aug_sem_mask);
  std::tie(out.h_sp, out.alpha_sp) = mlp_attention(final_dsp_, aug_spec, nullptr);
  return out;
}

std::pair<Var, Var> TdanModel::fuse_and_classify(const Var& h_s, const Var& h_sp) {
  Var fused_in;
  if (config_.variant == Variant::kTdanMinus) {
    fused_in = h_s;
  } else {
    if (!h_sp) throw Error("fuse_and_classify: missing h_sp");
    fused_in = ad::concat({h_s, h_sp}, /*axis=*/1);
  }
  Var h_f = ad::relu(ad::add(ad::matmul(fused_in, w_f_, false, true), b_f_));
  Var logits = ad::add(ad::matmul(h_f, w_c_, false, true), b_c_);
  return {logits, h_f};
}

Var TdanModel::domain_classify(const Var& h_f, double lambda) {
  Var in = config_.use_grl ? ad::gradient_reversal(h_f, lambda) : h_f;
  return ad::add(ad::matmul(in, w_d_, false, true), b_d_);
}

TdanModel::Forward TdanModel::forward(const std::vector<int>& doc_tokens,
                                      const std::vector<int>& specific_tokens,
                                      double lambda, bool training,
                                      std::uint64_t dropout_seed) {
  Forward out;
  EncodedContext sem = encode_semantics(doc_tokens, training, dropout_seed);
  out.doc_tokens = sem.tokens;

  switch (config_.variant) {
    case Variant::kTdanMinus: {
      std::tie(out.h_s, out.alpha_semantics) =
          mlp_attention(final_san_, sem.context, sem.pool_mask_col);
      break;
    }
    case Variant::kTdanF: {
      EncodedContext spec = encode_specific(specific_tokens, training, dropout_seed);
      out.specific_tokens = spec.tokens;
      std::tie(out.h_s, out.alpha_semantics) =
          mlp_attention(final_san_, sem.context, sem.pool_mask_col);
      std::tie(out.h_sp, out.alpha_specific) =
          mlp_attention(final_dsp_, spec.context, nullptr);
      break;
    }
    case Variant::kTdan: {
      EncodedContext spec = encode_specific(specific_tokens, training, dropout_seed);
      out.specific_tokens = spec.tokens;
      Pooled pooled = interactive_connect(sem, spec);
      out.h_s = pooled.h_s;
      out.h_sp = pooled.h_sp;
      out.alpha_semantics = pooled.alpha_s;
      out.alpha_specific = pooled.alpha_sp;
      break;
    }
  }

  std::tie(out.sentiment_logits, out.h_f) = fuse_and_classify(out.h_s, out.h_sp);
  out.domain_logits = domain_classify(out.h_f, lambda);
  return out;
}

std::vector<ad::Parameter> TdanModel::trainable_params() const {
  std::vector<ad::Parameter> out;
  for (const auto& p : params_) {
    if (config_.freeze_embeddings && p.name == "embedding") continue;
    out.push_back(p);
  }
  return out;
}

std::vector<std::vector<double>> TdanModel::snapshot_values() const {
  std::vector<std::vector<double>> snap;
  snap.reserve(params_.size());
  for (const auto& p : params_) snap.push_back(p.var->value);
  return snap;
}

void TdanModel::restore_values(const std::vector<std::vector<double>>& snapshot) {
  if (snapshot.size() != params_.size())
    throw Error("restore_values: snapshot has " + std::to_string(snapshot.size()) +
                " entries, model has " + std::to_string(params_.size()));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (snapshot[i].size() != params_[i].var->value.size())
      throw Error("restore_values: size mismatch for '" + params_[i].name + "'");
    params_[i].var->value = snapshot[i];
  }
}

void TdanModel::save_checkpoint(const std::string& path) const {
  json j;
  j["version"] = 1;
  json cfg;
  cfg["vocab_size"] = config_.vocab_size;
  cfg["d_h"] = config_.d_h;
  cfg["san_layers"] = config_.san_layers;
  cfg["dspwan_layers"] = config_.dspwan_layers;
  cfg["heads"] = config_.heads;
  cfg["ffn_dim"] = config_.resolved_ffn_dim();
  cfg["d_l"] = config_.d_l;
  cfg["d_sp_max"] = config_.d_sp_max;
  cfg["variant"] = to_string(config_.variant);
  cfg["interactive_self_wiring"] = config_.interactive_self_wiring;
  j["config"] = std::move(cfg);
  json params = json::object();
  for (const auto& p : params_) {
    json entry;
    entry["shape"] = {p.var->rows(), p.var->cols()};
    entry["values"] = p.var->value;
    params[p.name] = std::move(entry);
  }
  j["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint file: " + path);
  out << j.dump() << '\n';
}

void TdanModel::load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("checkpoint file " + path + ": " + e.what());
  }
  if (!j.contains("version") || j["version"].get<int>() != 1)
    throw Error("checkpoint file " + path + ": unsupported version");
  const json& cfg = j.at("config");
  auto expect = [&](const char* key, int got) {
    if (cfg.at(key).get<int>() != got)
      throw Error("checkpoint file " + path + ": config mismatch on " + key +
                  " (checkpoint " + cfg.at(key).dump() + ", model " +
                  std::to_string(got) + ")");
  };
  expect("vocab_size", config_.vocab_size);
  expect("d_h", config_.d_h);
  expect("san_layers", config_.san_layers);
  expect("dspwan_layers", config_.dspwan_layers);
  expect("heads", config_.heads);
  expect("ffn_dim", config_.resolved_ffn_dim());
  expect("d_l", config_.d_l);
  expect("d_sp_max", config_.d_sp_max);
  if (cfg.at("variant").get<std::string>() != to_string(config_.variant))
    throw Error("checkpoint file " + path + ": variant mismatch");
  const json& params = j.at("params");
  if (params.size() != params_.size())
    throw Error("checkpoint file " + path + ": expected " +
                std::to_string(params_.size()) + " parameters, found " +
                std::to_string(params.size()));
  for (auto& p : params_) {
    if (!params.contains(p.name))
      throw Error("checkpoint file " + path + ": missing parameter '" + p.name + "'");
    const json& entry = params.at(p.name);
    const auto shape = entry.at("shape").get<std::vector<int>>();
    if (shape.size() != 2 || shape[0] != p.var->rows() || shape[1] != p.var->cols())
      throw Error("checkpoint file " + path + ": shape mismatch for '" + p.name + "'");
    auto values = entry.at("values").get<std::vector<double>>();
    if (values.size() != p.var->value.size())
      throw Error("checkpoint file " + path + ": value count mismatch for '" + p.name +
                  "'");
    p.var->value = std::move(values);
  }
}

}  // namespace tdan
