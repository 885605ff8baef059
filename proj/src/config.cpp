#include "tdan/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace tdan {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key))
      throw Error("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void read_strings(const json& obj, const char* key, std::vector<std::string>& out) {
  if (obj.contains(key)) out = obj.at(key).get<std::vector<std::string>>();
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw Error("config file " + path + ": not a JSON object");
  if (!j.contains("version"))
    throw Error("config file " + path + ": missing version field");
  if (j["version"].get<int>() != 1)
    throw Error("config file " + path + ": unsupported version " + j["version"].dump());

  reject_unknown_keys(j,
                      {"version", "task", "seed", "tol", "vocab_min_freq", "dev_size",
                       "lda", "model", "train", "paths", "synthetic"},
                      "top level");

  RunConfig cfg;
  read(j, "task", cfg.task);
  read(j, "seed", cfg.seed);
  read(j, "tol", cfg.tol);
  read(j, "vocab_min_freq", cfg.vocab_min_freq);
  read(j, "dev_size", cfg.dev_size);
  if (cfg.tol <= 0.0) throw Error("config: tol must be positive");

  if (j.contains("lda")) {
    const json& l = j["lda"];
    reject_unknown_keys(
        l, {"k", "alpha", "eta", "gibbs_iterations", "fold_in_iterations"}, "lda");
    read(l, "k", cfg.lda.k);
    read(l, "alpha", cfg.lda.alpha);
    read(l, "eta", cfg.lda.eta);
    read(l, "gibbs_iterations", cfg.lda.gibbs_iterations);
    read(l, "fold_in_iterations", cfg.lda.fold_in_iterations);
  }

  if (j.contains("model")) {
    const json& m = j["model"];
    reject_unknown_keys(m,
                        {"d_h", "san_layers", "dspwan_layers", "heads", "ffn_dim",
                         "d_l", "d_sp_max", "dropout", "variant",
                         "interactive_self_wiring", "freeze_embeddings"},
                        "model");
    read(m, "d_h", cfg.model.d_h);
    read(m, "san_layers", cfg.model.san_layers);
    read(m, "dspwan_layers", cfg.model.dspwan_layers);
    read(m, "heads", cfg.model.heads);
    read(m, "ffn_dim", cfg.model.ffn_dim);
    read(m, "d_l", cfg.model.d_l);
    read(m, "d_sp_max", cfg.model.d_sp_max);
    read(m, "dropout", cfg.model.dropout);
    read(m, "interactive_self_wiring", cfg.model.interactive_self_wiring);
    read(m, "freeze_embeddings", cfg.model.freeze_embeddings);
    if (m.contains("variant"))
      cfg.model.variant = parse_variant(m.at("variant").get<std::string>());
  }

  if (j.contains("train")) {
    const json& t = j["train"];
    reject_unknown_keys(t,
                        {"rho", "lr", "weight_decay", "batch", "max_epochs", "patience",
                         "lambda_cap"},
                        "train");
    read(t, "rho", cfg.train.rho);
    read(t, "lr", cfg.train.lr);
    read(t, "weight_decay", cfg.train.weight_decay);
    read(t, "batch", cfg.train.batch);
    read(t, "max_epochs", cfg.train.max_epochs);
    read(t, "patience", cfg.train.patience);
    read(t, "lambda_cap", cfg.train.lambda_cap);
  }

  if (j.contains("paths")) {
    const json& p = j["paths"];
    reject_unknown_keys(p, {"source_corpus", "target_corpus", "embeddings", "out_dir"},
                        "paths");
    read(p, "source_corpus", cfg.source_corpus);
    read(p, "target_corpus", cfg.target_corpus);
    read(p, "embeddings", cfg.embeddings);
    read(p, "out_dir", cfg.out_dir);
  }

  if (j.contains("synthetic")) {
    const json& s = j["synthetic"];
    reject_unknown_keys(s,
                        {"docs_per_domain", "len_min", "len_max", "pos_markers",
                         "neg_markers", "source_background", "target_background",
                         "shared_words", "markers_min", "markers_max", "background_min",
                         "background_max"},
                        "synthetic");
    SyntheticSpec spec;
    read(s, "docs_per_domain", spec.docs_per_domain);
    read(s, "len_min", spec.len_min);
    read(s, "len_max", spec.len_max);
    read_strings(s, "pos_markers", spec.pos_markers);
    read_strings(s, "neg_markers", spec.neg_markers);
    read_strings(s, "source_background", spec.source_background);
    read_strings(s, "target_background", spec.target_background);
    read_strings(s, "shared_words", spec.shared_words);
    read(s, "markers_min", spec.markers_min);
    read(s, "markers_max", spec.markers_max);
    read(s, "background_min", spec.background_min);
    read(s, "background_max", spec.background_max);
    cfg.synthetic = std::move(spec);
  }

  cfg.train.seed = cfg.seed;
  cfg.lda.seed = cfg.seed;
  cfg.model.seed = cfg.seed;
  return cfg;
}

}  // namespace tdan
