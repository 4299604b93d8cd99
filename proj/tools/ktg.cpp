// ktg — operator entry point: dataset preparation/enrichment, training,
// generation, evaluation and standalone DPTS computation.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ktg/data.hpp"
#include "ktg/kb_client.hpp"
#include "ktg/kb_wikidata.hpp"
#include "ktg/metrics.hpp"
#include "ktg/model.hpp"
#include "ktg/reward.hpp"
#include "ktg/training.hpp"

namespace {

constexpr const char* kVersion = "ktg 0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitExternal = 4;

struct RunManifest {
  std::string command;
  nlohmann::json config;
  uint64_t seed = 0;
  std::vector<std::string> inputs, outputs;
  double duration_seconds = 0;

  void write(const std::string& path) const {
    nlohmann::json j = {{"command", command}, {"config", config},
                        {"seed", seed},       {"inputs", inputs},
                        {"outputs", outputs}, {"code_version", kVersion},
                        {"duration_seconds", duration_seconds}};
    std::string tmp = path + ".tmp";
    {
      std::ofstream out(tmp);
      out << j.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, path);
  }
};

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::vector<std::vector<std::string>> read_token_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ktg::ValidationError("cannot open file: " + path);
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(ktg::tokenize(line));
  return out;
}

std::string resolve_cache_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("KTG_CACHE_DIR")) return env;
  return "";
}

int cmd_prepare(const std::string& input, const std::string& out_dir,
                const std::string& fixtures, bool offline, const std::string& cache_dir,
                uint64_t seed) {
  Timer timer;
  auto examples = ktg::load_dataset(input);
  std::filesystem::create_directories(out_dir);

  std::unique_ptr<ktg::KbBackend> backend;
  if (!fixtures.empty())
    backend = std::make_unique<ktg::FixtureBackend>(fixtures);
  else if (offline)
    backend = std::make_unique<ktg::FailingBackend>();
  else
    backend = std::make_unique<ktg::WikidataBackend>();
  ktg::KbClient client(*backend, resolve_cache_dir(cache_dir));

  long warnings = 0;
  for (auto& ex : examples) {
    for (auto& e : ex.facts.entities) {
      if (!e.description.empty() || !e.domain.empty()) continue;
      try {
        auto aux = client.enrich_entity(e.id.empty() ? e.label : e.id);
        e.description = aux.description;
        e.domain = aux.domain;
      } catch (const ktg::TransportError&) {
        throw;  // no backend at all is fatal; a missing entry is merely a warning
      } catch (const std::exception& err) {
        ++warnings;
        std::cerr << "warning: no auxiliary knowledge for entity '" << e.label
                  << "': " << err.what() << " (substituting empty knowledge)\n";
      }
    }
    for (auto& r : ex.facts.relations) {
      if (r.hierarchy_path.size() > 2) continue;
      try {
        r.hierarchy_path = client.enrich_relation(r.id.empty()
                                                      ? ktg::relation_source_token(r)
                                                      : r.id);
      } catch (const ktg::TransportError&) {
        throw;
      } catch (const std::exception&) {
        // keep the [root, surface] fallback already present
      }
    }
  }

  auto split = ktg::split_dataset(examples, seed);
  auto train_path = out_dir + "/train.jsonl";
  auto valid_path = out_dir + "/valid.jsonl";
  auto test_path = out_dir + "/test.jsonl";
  ktg::save_dataset(split.train, train_path);
  ktg::save_dataset(split.valid, valid_path);
  ktg::save_dataset(split.test, test_path);

  std::cout << "prepared " << examples.size() << " examples -> " << split.train.size() << "/"
            << split.valid.size() << "/" << split.test.size() << " (train/valid/test)";
  if (warnings) std::cout << ", " << warnings << " enrichment warning(s)";
  std::cout << "\n";

  RunManifest man;
  man.command = "prepare";
  man.config = {{"offline", offline}, {"fixtures", fixtures}, {"cache_dir", cache_dir}};
  man.seed = seed;
  man.inputs = {input};
  man.outputs = {train_path, valid_path, test_path};
  man.duration_seconds = timer.seconds();
  man.write(out_dir + "/manifest.json");
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& train_path,
              const std::string& valid_path, const std::string& checkpoint,
              const std::string& loss_log, uint64_t seed_override, bool seed_given) {
  Timer timer;
  ktg::TrainConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ktg::ValidationError("cannot open config: " + config_path);
    nlohmann::json j = nlohmann::json::parse(in);
    cfg = j.get<ktg::TrainConfig>();
  }
  if (seed_given) cfg.seed = seed_override;
  cfg.validate();

  auto train_set = ktg::load_dataset(train_path);
  std::vector<ktg::QAExample> valid_set;
  if (!valid_path.empty()) valid_set = ktg::load_dataset(valid_path);

  ktg::ModelConfig mc;
  mc.dim = cfg.dim;
  mc.tree_arity = cfg.tree_arity;
  mc.init_seed = cfg.seed;
  mc.init_range = cfg.init_range;
  ktg::Model model = ktg::Model::from_examples(mc, train_set, cfg.min_freq);

  auto result = ktg::train(model, train_set, valid_set, cfg, loss_log, nullptr,
                           checkpoint + ".diagnostic");
  ktg::save_checkpoint(model, cfg, checkpoint);

  const auto& last = result.epochs.back();
  std::cout << "trained " << result.epochs.size() << " epoch(s), final total loss "
            << last.train.total << ", val " << last.val_total
            << (result.converged ? " (converged)" : "") << "\n";

  RunManifest man;
  man.command = "train";
  man.config = cfg;
  man.seed = cfg.seed;
  man.inputs = {train_path, valid_path};
  man.outputs = {checkpoint, loss_log};
  man.duration_seconds = timer.seconds();
  man.write(checkpoint + ".manifest.json");
  return kExitOk;
}

int cmd_generate(const std::string& checkpoint, const std::string& input,
                 const std::string& output) {
  Timer timer;
  ktg::TrainConfig cfg;
  ktg::Model model = ktg::load_checkpoint(checkpoint, &cfg);
  auto examples = ktg::load_dataset(input);
  std::ofstream out(output);
  if (!out) throw std::runtime_error("cannot write " + output);
  for (const auto& ex : examples) {
    ktg::Graph g;
    auto enc = ktg::encode_example(g, model, ex);
    auto res = ktg::decode(g, model, enc, ktg::DecodeMode::Greedy, cfg.max_decode_len);
    out << ktg::detokenize(res.question()) << "\n";
  }
  std::cout << "generated " << examples.size() << " question(s) -> " << output << "\n";

  RunManifest man;
  man.command = "generate";
  man.config = cfg;
  man.seed = cfg.seed;
  man.inputs = {checkpoint, input};
  man.outputs = {output};
  man.duration_seconds = timer.seconds();
  man.write(output + ".manifest.json");
  return kExitOk;
}

int cmd_evaluate(const std::string& hyp_path, const std::string& ref_path,
                 const std::string& json_out) {
  auto hyps = read_token_lines(hyp_path);
  auto refs = read_token_lines(ref_path);
  if (hyps.size() != refs.size())
    throw ktg::ValidationError("hyp/ref line counts differ");
  auto rep = ktg::evaluate_corpus(hyps, refs);
  std::cout << std::fixed << std::setprecision(4);
  std::cout << "BLEU-4 (corpus)        " << rep.bleu4 << "\n";
  std::cout << "ROUGE-L (mean sentence) " << rep.rouge_l << "\n";
  if (!json_out.empty()) {
    nlohmann::json j = {{"bleu4", rep.bleu4},
                        {"rouge_l", rep.rouge_l},
                        {"per_example_bleu", rep.per_example_bleu},
                        {"per_example_rouge", rep.per_example_rouge}};
    std::ofstream out(json_out);
    out << j.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_dpts(const std::string& hyp_path, const std::string& ref_path, double lambda,
             bool lexicalized) {
  auto hyps = read_token_lines(hyp_path);
  auto refs = read_token_lines(ref_path);
  if (hyps.size() != refs.size())
    throw ktg::ValidationError("hyp/ref line counts differ");
  ktg::RewardSpec spec;
  spec.lambda = lambda;
  spec.lexicalized = lexicalized;
  double sum = 0;
  std::cout << std::fixed << std::setprecision(6);
  for (size_t i = 0; i < hyps.size(); ++i) {
    double v = (hyps[i].empty() || refs[i].empty()) ? 0.0 : ktg::dpts(hyps[i], refs[i], spec);
    sum += v;
    std::cout << (i + 1) << "\t" << v << "\n";
  }
  std::cout << "mean\t" << (hyps.empty() ? 0.0 : sum / double(hyps.size())) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"question generation over knowledge-base fact paths"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  uint64_t seed = 7;
  bool offline = false;
  std::string cache_dir;
  app.add_option("--seed", seed, "random seed");
  app.add_flag("--offline", offline, "forbid network access");
  app.add_option("--cache-dir", cache_dir, "auxiliary-knowledge cache directory");

  std::string in_path, out_dir, fixtures;
  auto* prepare = app.add_subcommand("prepare", "enrich a raw dataset and emit splits");
  prepare->add_option("--input", in_path, "raw JSONL dataset")->required();
  prepare->add_option("--out-dir", out_dir, "output directory")->required();
  prepare->add_option("--fixtures", fixtures, "fixture directory for offline enrichment");

  std::string config_path, train_path, valid_path, checkpoint = "ktg.ckpt",
              loss_log = "loss.csv";
  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", config_path, "training config JSON");
  train->add_option("--train", train_path, "training JSONL")->required();
  train->add_option("--valid", valid_path, "validation JSONL");
  train->add_option("--checkpoint", checkpoint, "output checkpoint path");
  train->add_option("--loss-log", loss_log, "per-epoch CSV loss log");

  std::string gen_ckpt, gen_input, gen_output = "questions.txt";
  auto* generate = app.add_subcommand("generate", "greedy-decode questions for a dataset");
  generate->add_option("--checkpoint", gen_ckpt, "model checkpoint")->required();
  generate->add_option("--input", gen_input, "input JSONL")->required();
  generate->add_option("--output", gen_output, "output questions file");

  std::string hyp_path, ref_path, json_out;
  auto* evaluate = app.add_subcommand("evaluate", "BLEU-4 / ROUGE-L between files");
  evaluate->add_option("--hyp", hyp_path, "hypotheses, one per line")->required();
  evaluate->add_option("--ref", ref_path, "references, one per line")->required();
  evaluate->add_option("--json", json_out, "also write a JSON report");

  std::string d_hyp, d_ref;
  double lambda = 0.5;
  bool lexicalized = false;
  auto* dpts_cmd = app.add_subcommand("dpts", "dependency-parse-tree similarity per line");
  dpts_cmd->add_option("--hyp", d_hyp, "hypotheses, one per line")->required();
  dpts_cmd->add_option("--ref", d_ref, "references, one per line")->required();
  dpts_cmd->add_option("--lambda", lambda, "kernel decay in (0,1]");
  dpts_cmd->add_flag("--lexicalized", lexicalized, "include word forms in productions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (prepare->parsed())
      return cmd_prepare(in_path, out_dir, fixtures, offline, cache_dir, seed);
    if (train->parsed())
      return cmd_train(config_path, train_path, valid_path, checkpoint, loss_log, seed,
                       app.count("--seed") > 0);
    if (generate->parsed()) return cmd_generate(gen_ckpt, gen_input, gen_output);
    if (evaluate->parsed()) return cmd_evaluate(hyp_path, ref_path, json_out);
    if (dpts_cmd->parsed()) return cmd_dpts(d_hyp, d_ref, lambda, lexicalized);
  } catch (const ktg::TransportError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitExternal;
  } catch (const ktg::NotFoundError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitExternal;
  } catch (const ktg::CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const ktg::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
