#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>
#include <json.hpp>

#include "tdan/config.hpp"
#include "tdan/corpus.hpp"
#include "tdan/dsw.hpp"
#include "tdan/embedding.hpp"
#include "tdan/lda.hpp"
#include "tdan/model.hpp"
#include "tdan/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tdan;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> task;
  std::optional<std::string> variant;
  std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "run configuration JSON")->required();
  cmd->add_option("--seed", flags.seed, "override config seed");
  cmd->add_option("--task", flags.task, "task name, e.g. B-K");
  cmd->add_option("--variant", flags.variant, "tdan|tdan-f|tdan-minus");
  cmd->add_option("--out", flags.out_dir, "output directory");
}

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig cfg = load_run_config(flags.config_path);
  if (flags.seed) {
    cfg.seed = *flags.seed;
    cfg.lda.seed = *flags.seed;
    cfg.model.seed = *flags.seed;
    cfg.train.seed = *flags.seed;
  }
  if (flags.task) cfg.task = *flags.task;
  if (flags.variant) cfg.model.variant = parse_variant(*flags.variant);
  if (flags.out_dir) cfg.out_dir = *flags.out_dir;
  fs::create_directories(cfg.out_dir);
  return cfg;
}

std::string artifact(const RunConfig& cfg, const char* name) {
  return (fs::path(cfg.out_dir) / name).string();
}

void require_artifact(const std::string& path, const char* producing_command) {
  if (!fs::exists(path))
    throw Error("missing artifact " + path + "; run `tdan " +
                std::string(producing_command) + "` first");
}

int cmd_synth(const RunConfig& cfg) {
  if (!cfg.synthetic)
    throw Error("synth: config has no `synthetic` section");
  if (cfg.source_corpus.empty() || cfg.target_corpus.empty())
    throw Error("synth: paths.source_corpus and paths.target_corpus must be set");
  auto docs = generate_synthetic_docs(*cfg.synthetic, cfg.seed);
  std::vector<RawDocument> source, target;
  for (auto& d : docs)
    (d.domain == Domain::kSource ? source : target).push_back(std::move(d));
  write_corpus_jsonl(cfg.source_corpus, source);
  write_corpus_jsonl(cfg.target_corpus, target);

  // Generation parameters, recorded so oracle tests can re-derive labels.
  json params;
  params["seed"] = cfg.seed;
  params["docs_per_domain"] = cfg.synthetic->docs_per_domain;
  params["pos_markers"] = cfg.synthetic->pos_markers;
  params["neg_markers"] = cfg.synthetic->neg_markers;
  params["source_background"] = cfg.synthetic->source_background;
  params["target_background"] = cfg.synthetic->target_background;
  std::ofstream out(artifact(cfg, "synth_params.json"));
  out << params.dump(2) << '\n';

  json report;
  report["source_docs"] = source.size();
  report["target_docs"] = target.size();
  std::cout << report.dump() << "\n";
  return 0;
}

int cmd_ingest(const RunConfig& cfg) {
  require_artifact(cfg.source_corpus, "synth (or provide a real corpus)");
  require_artifact(cfg.target_corpus, "synth (or provide a real corpus)");
  auto raw = load_corpus_jsonl(cfg.source_corpus);
  auto raw_target = load_corpus_jsonl(cfg.target_corpus);
  raw.insert(raw.end(), raw_target.begin(), raw_target.end());

  DomainPairDataset ds = assemble_dataset(raw, cfg.vocab_min_freq);
  split_dataset(ds, cfg.dev_size, cfg.seed);
  save_dataset(artifact(cfg, "dataset.json"), ds, cfg.task);

  CorpusCounts counts = count_corpus(raw);
  json report;
  report["total"] = counts.total;
  report["source"] = counts.source;
  report["target"] = counts.target;
  report["labeled"] = counts.labeled;
  report["positive"] = counts.positive;
  report["negative"] = counts.negative;
  report["vocab_size"] = ds.vocab.size();
  report["dev"] = ds.dev.size();
  report["test"] = ds.test.size();
  std::cout << report.dump() << "\n";
  return 0;
}

int cmd_train_topics(const RunConfig& cfg) {
  require_artifact(artifact(cfg, "dataset.json"), "ingest");
  DomainPairDataset ds = load_dataset(artifact(cfg, "dataset.json"));
  TopicModel model = fit_lda(ds.docs, ds.vocab, cfg.lda);
  save_topic_model(artifact(cfg, "topics.json"), model);

  json report;
  report["k"] = model.k;
  report["vocab_size"] = model.vocab_size;
  report["ll_first_sweep"] = model.ll_history.front();
  report["ll_last_sweep"] = model.ll_history.back();
  std::cout << report.dump() << "\n";
  return 0;
}

int cmd_extract(const RunConfig& cfg) {
  require_artifact(artifact(cfg, "dataset.json"), "ingest");
  require_artifact(artifact(cfg, "topics.json"), "train-topics");
  DomainPairDataset ds = load_dataset(artifact(cfg, "dataset.json"));
  TopicModel model = load_topic_model(artifact(cfg, "topics.json"));
  if (model.vocab_hash != ds.vocab.hash())
    throw Error("extract: topic model was trained on a different vocabulary; "
                "re-run `tdan train-topics`");

  DomainTopicProfile profile = compute_domain_profile(model, ds);
  SpecificTopicSets sets = classify_specific_topics(profile, cfg.tol);
  auto extraction =
      extract_domain_specific_words(ds, model, sets, cfg.model.d_sp_max);
  save_extraction(artifact(cfg, "extraction.jsonl"), extraction, ds);

  std::size_t total_words = 0;
  for (const auto& [id, words] : extraction) total_words += words.tokens.size() - 1;
  json report;
  report["source_specific_topics"] =
      std::vector<int>(sets.source_specific.begin(), sets.source_specific.end());
  report["target_specific_topics"] =
      std::vector<int>(sets.target_specific.begin(), sets.target_specific.end());
  report["documents"] = extraction.size();
  report["extracted_words"] = total_words;
  std::cout << report.dump() << "\n";
  return 0;
}

std::unique_ptr<TdanModel> build_model(const RunConfig& cfg,
                                       const DomainPairDataset& ds) {
  ModelConfig mc = cfg.model;
  mc.vocab_size = ds.vocab.size();
  if (!cfg.embeddings.empty()) {
    EmbeddingTable table = load_embeddings(cfg.embeddings, ds.vocab, mc.d_h, cfg.seed);
    std::cerr << "embeddings: coverage " << table.coverage_ratio() << "\n";
    return std::make_unique<TdanModel>(mc, &table);
  }
  return std::make_unique<TdanModel>(mc, nullptr);
}

int cmd_train(const RunConfig& cfg) {
  require_artifact(artifact(cfg, "dataset.json"), "ingest");
  require_artifact(artifact(cfg, "extraction.jsonl"), "extract");
  DomainPairDataset ds = load_dataset(artifact(cfg, "dataset.json"));
  auto extraction = load_extraction(artifact(cfg, "extraction.jsonl"), ds.vocab);
  auto model = build_model(cfg, ds);

  TrainResult result = train(*model, ds, extraction, ds.dev, cfg.train);
  model->restore_values(result.best_values);
  model->save_checkpoint(artifact(cfg, "checkpoint.json"));
  save_train_log(artifact(cfg, "train_log.jsonl"), result.log);

  json report;
  report["epochs_run"] = result.epochs_run;
  report["best_epoch"] = result.best_epoch;
  report["best_dev_accuracy"] = result.best_dev_accuracy;
  report["variant"] = to_string(cfg.model.variant);
  std::cout << report.dump() << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  require_artifact(artifact(cfg, "dataset.json"), "ingest");
  require_artifact(artifact(cfg, "extraction.jsonl"), "extract");
  require_artifact(artifact(cfg, "checkpoint.json"), "train");
  DomainPairDataset ds = load_dataset(artifact(cfg, "dataset.json"));
  auto extraction = load_extraction(artifact(cfg, "extraction.jsonl"), ds.vocab);
  auto model = build_model(cfg, ds);
  model->load_checkpoint(artifact(cfg, "checkpoint.json"));

  const double accuracy = evaluate_accuracy(*model, ds, extraction, ds.test);

  // Domain accuracy needs both classes; mix the target test docs with an
  // equally sized seeded sample of source docs.
  std::vector<int> source_ids = ds.source_labeled;
  std::mt19937_64 rng(mix_seed(cfg.seed, "domain-eval"));
  std::shuffle(source_ids.begin(), source_ids.end(), rng);
  source_ids.resize(std::min(source_ids.size(), ds.test.size()));
  std::vector<int> mixed = ds.test;
  mixed.insert(mixed.end(), source_ids.begin(), source_ids.end());
  const double dom_acc = domain_accuracy(*model, ds, extraction, mixed);

  json metrics;
  metrics["accuracy"] = accuracy;
  metrics["domain_accuracy"] = dom_acc;
  metrics["n_test"] = ds.test.size();
  metrics["task"] = cfg.task;
  metrics["variant"] = to_string(cfg.model.variant);
  std::ofstream out(artifact(cfg, "metrics.json"));
  out << metrics.dump(2) << '\n';
  std::cout << metrics.dump() << "\n";
  return 0;
}

int cmd_attn_export(const RunConfig& cfg, const std::string& split, int limit) {
  require_artifact(artifact(cfg, "dataset.json"), "ingest");
  require_artifact(artifact(cfg, "extraction.jsonl"), "extract");
  require_artifact(artifact(cfg, "checkpoint.json"), "train");
  DomainPairDataset ds = load_dataset(artifact(cfg, "dataset.json"));
  auto extraction = load_extraction(artifact(cfg, "extraction.jsonl"), ds.vocab);
  auto model = build_model(cfg, ds);
  model->load_checkpoint(artifact(cfg, "checkpoint.json"));

  std::vector<int> ids;
  if (split == "dev")
    ids = ds.dev;
  else if (split == "test")
    ids = ds.test;
  else if (split == "all")
    for (const auto& d : ds.docs) ids.push_back(d.id);
  else
    throw Error("attn-export: unknown split '" + split + "'");
  if (limit > 0 && static_cast<int>(ids.size()) > limit) ids.resize(limit);

  const bool interactive = cfg.model.variant == Variant::kTdan;
  json exported = json::array();
  for (int id : ids) {
    const Document& doc = ds.docs[id];
    auto fwd = model->forward(doc.tokens, extraction.at(id).tokens, 0.0,
                              /*training=*/false, 0);
    json entry;
    entry["doc_id"] = id;
    entry["domain"] = to_string(doc.domain);

    // Pad positions carry exactly zero weight; keep only the real tokens
    // (plus the appended cross-branch context row for the full variant).
    std::vector<std::string> tokens;
    std::vector<double> alpha_sem;
    const auto& a_s = fwd.alpha_semantics->value;
    for (std::size_t j = 0; j < fwd.doc_tokens.size(); ++j) {
      tokens.push_back(ds.vocab.word(fwd.doc_tokens[j]));
      alpha_sem.push_back(a_s[j]);
    }
    if (interactive) {
      tokens.push_back("<context>");
      alpha_sem.push_back(a_s.back());
    }
    entry["tokens"] = tokens;
    entry["alpha_semantics"] = alpha_sem;

    if (fwd.alpha_specific) {
      std::vector<std::string> words;
      std::vector<double> alpha_sp;
      const auto& a_sp = fwd.alpha_specific->value;
      for (std::size_t j = 0; j < fwd.specific_tokens.size(); ++j) {
        words.push_back(ds.vocab.word(fwd.specific_tokens[j]));
        alpha_sp.push_back(a_sp[j]);
      }
      if (interactive) {
        words.push_back("<context>");
        alpha_sp.push_back(a_sp.back());
      }
      entry["specific_words"] = words;
      entry["alpha_specific"] = alpha_sp;
    }
    exported.push_back(std::move(entry));
  }
  std::ofstream out(artifact(cfg, "attention.json"));
  out << exported.dump(2) << '\n';
  std::cout << json{{"exported", exported.size()}}.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TDAN cross-domain sentiment classification pipeline"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string attn_split = "dev";
  int attn_limit = 0;

  auto* synth = app.add_subcommand("synth", "generate a synthetic domain pair");
  auto* ingest = app.add_subcommand("ingest", "tokenize corpora and build the dataset");
  auto* topics = app.add_subcommand("train-topics", "fit the LDA topic model");
  auto* extract = app.add_subcommand("extract", "extract domain-specific words");
  auto* train_cmd = app.add_subcommand("train", "train the network");
  auto* eval_cmd = app.add_subcommand("eval", "evaluate the trained checkpoint");
  auto* attn = app.add_subcommand("attn-export", "export attention scores");
  for (auto* cmd : {synth, ingest, topics, extract, train_cmd, eval_cmd, attn})
    add_common(cmd, flags);
  attn->add_option("--split", attn_split, "dev|test|all");
  attn->add_option("--limit", attn_limit, "max documents (0 = all)");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = resolve_config(flags);
    if (synth->parsed()) return cmd_synth(cfg);
    if (ingest->parsed()) return cmd_ingest(cfg);
    if (topics->parsed()) return cmd_train_topics(cfg);
    if (extract->parsed()) return cmd_extract(cfg);
    if (train_cmd->parsed()) return cmd_train(cfg);
    if (eval_cmd->parsed()) return cmd_eval(cfg);
    if (attn->parsed()) return cmd_attn_export(cfg, attn_split, attn_limit);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
