#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tdan/autodiff.hpp"
#include "tdan/embedding.hpp"

namespace tdan {

enum class Variant { kTdan, kTdanF, kTdanMinus };

const char* to_string(Variant v);
Variant parse_variant(const std::string& s);

struct ModelConfig {
  int vocab_size = 0;
  int d_h = 300;
  int san_layers = 6;
  int dspwan_layers = 3;
  int heads = 4;
  int ffn_dim = 0;  // 0 selects 4 * d_h
  int d_l = 256;
  int d_sp_max = 64;
  double dropout = 0.25;
  Variant variant = Variant::kTdan;
  bool interactive_self_wiring = false;  // literal reading, kept for comparison
  bool use_grl = true;
  bool freeze_embeddings = false;
  std::uint64_t seed = 0;

  int resolved_ffn_dim() const { return ffn_dim > 0 ? ffn_dim : 4 * d_h; }
  void validate() const;
};

// Sinusoidal position embeddings, d_l x d_h. d_h must be even.
std::vector<double> positional_encoding(int d_l, int d_h);

// Additive attention over context rows: f(c_j, q) = w^T tanh(W1 c_j + W2 q).
struct MlpAttentionHead {
  ad::Var q;   // 1 x d_h
  ad::Var w;   // 1 x d_h
  ad::Var w1;  // d_h x d_h
  ad::Var w2;  // d_h x d_h
};

// Context matrix plus masks marking the real (non-pad) rows. Fixed-shape
// d_l x d_h for the semantics branch; n x d_h (no padding) for the
// specific-word branch, where both masks are null.
struct EncodedContext {
  ad::Var context;
  ad::Var key_mask_row;   // 1 x n, 0 for real keys, -inf for padding
  ad::Var pool_mask_col;  // n x 1, same convention
  int n_real = 0;
  std::vector<int> tokens;  // ids actually encoded (after truncation)
};

class TdanModel {
 public:
  // Pretrained embeddings are optional; without them the table is
  // xavier-initialized (with a zero <pad> row).
  explicit TdanModel(const ModelConfig& config,
                     const EmbeddingTable* pretrained = nullptr);

  struct Forward {
    ad::Var sentiment_logits;  // 1 x 2
    ad::Var domain_logits;     // 1 x 2
    ad::Var h_s;
    ad::Var h_sp;  // null for tdan-minus
    ad::Var h_f;
    ad::Var alpha_semantics;  // pooling weights behind h_s
    ad::Var alpha_specific;   // null for tdan-minus
    std::vector<int> doc_tokens;
    std::vector<int> specific_tokens;
  };

  Forward forward(const std::vector<int>& doc_tokens,
                  const std::vector<int>& specific_tokens, double lambda,
                  bool training, std::uint64_t dropout_seed);

  // Exposed pipeline stages (forward() composes these).
  EncodedContext encode_semantics(const std::vector<int>& doc_tokens, bool training,
                                  std::uint64_t dropout_seed);
  EncodedContext encode_specific(const std::vector<int>& specific_tokens, bool training,
                                 std::uint64_t dropout_seed);
  // Returns (h, alpha); alpha is n x 1 with exact zeros at masked rows.
  static std::pair<ad::Var, ad::Var> mlp_attention(const MlpAttentionHead& head,
                                                   const ad::Var& context,
                                                   const ad::Var& pool_mask_col);
  struct Pooled {
    ad::Var h_s;
    ad::Var h_sp;
    ad::Var alpha_s;
    ad::Var alpha_sp;
  };
  Pooled interactive_connect(const EncodedContext& sem, const EncodedContext& spec);
  std::pair<ad::Var, ad::Var> fuse_and_classify(const ad::Var& h_s,
                                                const ad::Var& h_sp);  // logits, h_f
  ad::Var domain_classify(const ad::Var& h_f, double lambda);

  const ModelConfig& config() const { return config_; }
  std::vector<ad::Parameter>& params() { return params_; }
  // Parameters the optimizer may update (excludes frozen embeddings).
  std::vector<ad::Parameter> trainable_params() const;
  const ad::Var& embedding() const { return embedding_; }

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

  // Deep copy / restore of parameter values (best-checkpoint bookkeeping).
  std::vector<std::vector<double>> snapshot_values() const;
  void restore_values(const std::vector<std::vector<double>>& snapshot);

 private:
  struct EncoderLayer {
    std::vector<ad::Var> wq, wk, wv;  // per head, d_k x d_h
    ad::Var wo;                       // d_h x d_h
    ad::Var ln1_g, ln1_b;
    ad::Var ff1, ff1_b;  // ffn x d_h, 1 x ffn
    ad::Var ff2, ff2_b;  // d_h x ffn, 1 x d_h
    ad::Var ln2_g, ln2_b;
  };

  ad::Var reg_xavier(const std::string& name, int rows, int cols, std::mt19937_64& rng);
  ad::Var reg_const(const std::string& name, int rows, int cols, double fill);
  EncoderLayer make_layer(const std::string& prefix, std::mt19937_64& rng);
  MlpAttentionHead make_head(const std::string& prefix, std::mt19937_64& rng);
  ad::Var run_layer(const EncoderLayer& layer, const ad::Var& x,
                    const ad::Var& key_mask_row, bool training,
                    std::uint64_t dropout_seed, std::uint64_t& dropout_counter);
  ad::Var run_stack(const std::vector<EncoderLayer>& stack, const ad::Var& x,
                    const ad::Var& key_mask_row, bool training,
                    std::uint64_t dropout_seed);

  ModelConfig config_;
  std::vector<ad::Parameter> params_;
  ad::Var embedding_;
  ad::Var positional_;  // constant d_l x d_h
  std::vector<EncoderLayer> san_;
  std::vector<EncoderLayer> dspwan_;
  MlpAttentionHead pool_san_;    // pre-pool over C
  MlpAttentionHead pool_dsp_;    // pre-pool over C_sp
  MlpAttentionHead final_san_;   // produces h_s
  MlpAttentionHead final_dsp_;   // produces h_sp
  ad::Var w_f_, b_f_;
  ad::Var w_c_, b_c_;
  ad::Var w_d_, b_d_;
};

}  // namespace tdan
