#include "cli.hpp"

#include "nmtadv/attack.hpp"
#include "nmtadv/checkpoint.hpp"
#include "nmtadv/corpus.hpp"
#include "nmtadv/errors.hpp"
#include "nmtadv/metrics.hpp"
#include "nmtadv/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#ifndef NMTADV_VERSION
#define NMTADV_VERSION "0.0.0"
#endif

namespace nmtadv::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  for (int no = 1; std::getline(in, line); ++no) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError(path + ":" + std::to_string(no) + ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw InputError("no such file: " + path);
}

// Options that can also come from a key/value config file under the same name.
class Settings {
 public:
  explicit Settings(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_, "key = value file; command-line flags win");
  }

  template <typename T>
  CLI::Option* add(const std::string& name, T& ref, const std::string& desc) {
    setters_[name] = [&ref, name](const std::string& v) {
      if (!CLI::detail::lexical_cast(v, ref)) throw InputError("config key " + name + ": bad value '" + v + "'");
    };
    values_[name] = [&ref] {
      std::ostringstream out;
      out << std::setprecision(17) << ref;
      return out.str();
    };
    return app_->add_option("--" + name, ref, desc)->capture_default_str();
  }

  void apply_config() {
    if (config_path_.empty()) return;
    for (const auto& [key, value] : read_key_values(config_path_)) {
      const auto it = setters_.find(key);
      if (it == setters_.end()) throw InputError("unknown key '" + key + "' in " + config_path_);
      if (app_->get_option("--" + key)->count() == 0) it->second(value);
    }
  }

  [[nodiscard]] json effective() const {
    json j = json::object();
    for (const auto& [k, f] : values_) j[k] = f();
    return j;
  }

  [[nodiscard]] const std::string& config_path() const { return config_path_; }

 private:
  CLI::App* app_;
  std::string config_path_;
  std::map<std::string, std::function<void(const std::string&)>> setters_;
  std::map<std::string, std::function<std::string()>> values_;
};

struct Manifest {
  json j;

  Manifest(const std::string& command, const std::vector<std::string>& args) {
    j["tool"] = "nmtadv";
    j["version"] = NMTADV_VERSION;
    j["command"] = command;
    j["args"] = args;
    j["started"] = utc_now();
  }
  void input(const std::string& path) { j["inputs"][path] = file_digest(path); }
  void output(const std::string& path) { j["outputs"][path] = file_digest(path); }
  void write(const std::string& path) {
    j["finished"] = utc_now();
    std::ofstream out(path);
    if (!out) throw InputError("cannot write manifest " + path);
    out << j.dump(2) << '\n';
  }
};

std::string canonical_of(const json& settings) {
  std::string text;
  for (const auto& [k, v] : settings.items()) text += k + "=" + v.get<std::string>() + "\n";
  return text;
}

// -- synth -------------------------------------------------------------------------------

struct SynthArgs {
  std::size_t pairs = 1000;
  std::uint64_t seed = 1;
  std::string src, tgt;
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  const auto c = synthetic_corpus(a.pairs, a.seed);
  write_lines(a.src, c.source);
  write_lines(a.tgt, c.target);
  out << "wrote " << c.size() << " pairs to " << a.src << " and " << a.tgt << '\n';
}

// -- train -------------------------------------------------------------------------------

struct TrainArgs {
  std::string src, tgt, out, loss_csv, manifest, name;
  std::string arch = "recurrent";
  std::string optimizer = "adam";
  int merges = 400;
  int embed_dim = 32;
  int hidden_dim = 64;
  int layers = 1;
  int heads = 4;
  int max_len = 24;
  double learning_rate = 1e-3;
  int epochs = 10;
  int batch_size = 16;
  std::uint64_t seed = 1;
  double clip_norm = 5.0;
  double dev_frac = 0.0;
};

void cmd_train(const TrainArgs& a, const Settings& settings, const std::vector<std::string>& args, std::ostream& out) {
  require_file(a.src);
  require_file(a.tgt);
  const std::string loss_csv = a.loss_csv.empty() ? a.out + ".loss.csv" : a.loss_csv;
  const std::string manifest_path = a.manifest.empty() ? a.out + ".manifest.json" : a.manifest;
  Manifest manifest("train", args);
  manifest.input(a.src);
  manifest.input(a.tgt);

  const ParallelCorpus corpus = load_parallel_corpus(a.src, a.tgt);
  CorpusSplits splits;
  if (a.dev_frac > 0.0)
    splits = split_corpus(corpus, a.dev_frac, 0.0, a.seed);
  else
    splits.train = corpus;

  std::vector<std::string> all = splits.train.source;
  all.insert(all.end(), splits.train.target.begin(), splits.train.target.end());
  Checkpoint ckpt;
  ckpt.tokenizer = learn_bpe(all, a.merges);
  ckpt.source_words = unique_words(splits.train.source);

  ModelConfig mc;
  mc.arch = parse_architecture(a.arch);
  mc.vocab_size = static_cast<int>(ckpt.tokenizer.vocab().size());
  mc.embed_dim = a.embed_dim;
  mc.hidden_dim = a.hidden_dim;
  mc.layers = a.layers;
  mc.heads = a.heads;
  mc.max_len = a.max_len;
  TrainConfig tc;
  tc.learning_rate = a.learning_rate;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch_size;
  tc.seed = a.seed;
  tc.clip_norm = a.clip_norm;
  tc.optimizer = parse_optimizer(a.optimizer);

  const auto train = encode_corpus(ckpt.tokenizer, splits.train, mc.max_len);
  const auto dev = encode_corpus(ckpt.tokenizer, splits.dev, mc.max_len);
  auto result = train_model(mc, tc, train.examples, dev.examples, [&](const EpochLoss& e) {
    out << "epoch " << e.epoch << " train_loss " << e.train_loss << '\n';
  });
  ckpt.model = std::move(result.model);

  const json effective = settings.effective();
  const std::string digest = digest_hex(canonical_of(effective));
  ckpt.metadata["name"] = a.name.empty() ? fs::path(a.out).stem().string() : a.name;
  ckpt.metadata["manifest"] = fs::path(manifest_path).filename().string();
  ckpt.metadata["train.config_digest"] = digest;
  ckpt.metadata["train.pairs"] = std::to_string(train.examples.size());
  ckpt.metadata["train.skipped_too_long"] = std::to_string(train.skipped_too_long);
  save_checkpoint(ckpt, a.out);
  write_loss_csv(loss_csv, result.curve);

  manifest.j["config"] = effective;
  manifest.j["config_digest"] = digest;
  manifest.j["seed"] = a.seed;
  manifest.output(a.out);
  manifest.output(loss_csv);
  manifest.write(manifest_path);
  out << "checkpoint " << a.out << " digest " << file_digest(a.out) << '\n';
}

// -- attack ------------------------------------------------------------------------------

struct AttackArgs {
  std::string checkpoint, sentences, out, manifest;
  std::string method = "min-grad+soft-att";
  std::string loss_mode = "hard";
  std::string update = "softmax";
  AttackConfig cfg;
  int workers = 0;
  std::size_t sample = 0;
};

json record_json(const AttackOutcome& o, const std::string& src, const Tokenizer& tok, const std::string& digest,
                 std::uint64_t run_seed) {
  json j;
  j["index"] = o.index;
  j["src"] = src;
  if (!o.result) {
    j["skipped"] = o.skipped;
    j["config_digest"] = digest;
    j["seed"] = sentence_seed(run_seed, o.index);
    return j;
  }
  const AttackResult& r = *o.result;
  j["adv_src"] = r.adv_text;
  j["pred"] = r.pred_text;
  j["adv_pred"] = r.adv_pred_text;
  j["success"] = r.success;
  json reps = json::array();
  for (const auto& rep : r.trace.replacements) {
    json x;
    x["position"] = rep.position;
    x["old"] = tok.vocab().token(rep.old_token);
    x["new"] = tok.vocab().token(rep.new_token);
    x["loss_before"] = rep.loss_before;
    x["loss_after"] = rep.loss_after;
    x["sweep"] = rep.sweep;
    x["rule"] = to_string(rep.rule);
    reps.push_back(std::move(x));
  }
  j["replacements"] = std::move(reps);
  j["nor"] = r.nor;
  j["config_digest"] = digest;
  j["seed"] = r.seed;
  j["l_org"] = r.trace.l_org;
  j["sweeps"] = r.trace.sweeps;
  if (r.no_replacement) j["no_replacement"] = true;
  if (!r.premise_held) j["premise_violated"] = true;
  return j;
}

int resolve_workers(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("NMTADV_WORKERS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
    throw InputError(std::string("NMTADV_WORKERS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

void cmd_attack(AttackArgs a, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  require_file(a.checkpoint);
  require_file(a.sentences);
  {
    const AttackConfig preset = AttackConfig::for_method(a.method);
    a.cfg.traversal = preset.traversal;
    a.cfg.replacement = preset.replacement;
  }
  a.cfg.loss_mode = parse_loss_mode(a.loss_mode);
  a.cfg.update = parse_update(a.update);
  a.cfg.validate();
  const int workers = resolve_workers(a.workers);

  Manifest manifest("attack", args);
  manifest.input(a.checkpoint);
  manifest.input(a.sentences);
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  std::vector<std::string> sentences = read_lines(a.sentences);
  if (sentences.empty()) throw InputError("sentence file is empty: " + a.sentences);
  if (a.sample > 0 && a.sample < sentences.size()) {
    std::vector<std::size_t> idx(sentences.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(a.cfg.seed);
    rng.shuffle(idx);
    idx.resize(a.sample);
    std::sort(idx.begin(), idx.end());
    std::vector<std::string> picked;
    for (auto i : idx) picked.push_back(sentences[i]);
    sentences = std::move(picked);
  }

  const auto outcomes = attack_sentences(ckpt.model, ckpt.tokenizer, ckpt.source_words, sentences, a.cfg, workers);
  const std::string digest = a.cfg.digest();

  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out);
    if (!file) throw InputError("cannot write " + a.out);
  }
  std::ostream& sink = a.out.empty() ? out : file;
  std::vector<Outcome> stats;
  std::size_t skipped = 0, no_replacement = 0, premise = 0;
  for (const auto& o : outcomes) {
    sink << record_json(o, sentences[o.index], ckpt.tokenizer, digest, a.cfg.seed).dump() << '\n';
    if (!o.result) {
      ++skipped;
      continue;
    }
    stats.push_back({o.result->success, o.result->nor});
    no_replacement += o.result->no_replacement;
    premise += !o.result->premise_held;
  }
  json summary;
  summary["summary"] = true;
  summary["model"] = ckpt.metadata.count("name") ? ckpt.metadata.at("name") : fs::path(a.checkpoint).stem().string();
  summary["method"] = a.cfg.method();
  summary["loss_mode"] = to_string(a.cfg.loss_mode);
  summary["attacked"] = stats.size();
  summary["skipped"] = skipped;
  if (!stats.empty()) {
    const auto nor = nor_stats(stats);
    summary["success_rate"] = success_rate(stats);
    summary["nor_mean"] = nor.mean;
    summary["nor_median"] = nor.median;
  }
  summary["no_replacement"] = no_replacement;
  summary["premise_violations"] = premise;
  summary["config_digest"] = digest;
  summary["seed"] = a.cfg.seed;
  const std::string manifest_path = !a.manifest.empty() ? a.manifest : (a.out.empty() ? "" : a.out + ".manifest.json");
  if (!manifest_path.empty()) summary["manifest"] = fs::path(manifest_path).filename().string();
  sink << summary.dump() << '\n';
  sink.flush();

  if (!manifest_path.empty()) {
    std::istringstream canon(a.cfg.canonical());
    json cfg = json::object();
    for (std::string line; std::getline(canon, line);) {
      const auto eq = line.find('=');
      cfg[line.substr(0, eq)] = line.substr(eq + 1);
    }
    manifest.j["config"] = cfg;
    manifest.j["config_digest"] = digest;
    manifest.j["seed"] = a.cfg.seed;
    manifest.j["workers"] = workers;
    if (!a.out.empty()) manifest.output(a.out);
    manifest.write(manifest_path);
  }
  err << "attacked " << stats.size() << ", skipped " << skipped;
  if (!stats.empty()) err << ", success rate " << success_rate(stats) << "%";
  err << '\n';
}

// -- report ------------------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> results, fleet;
  std::size_t attacked = 0;
  std::string markdown, csv, json_out, bleu_rows;
  int beam_width = 5;
  bool no_smoothing = false;
};

struct ResultsFile {
  std::string model, method;
  std::vector<Outcome> outcomes;
  std::vector<std::string> originals, adversarials;
};

ResultsFile read_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open results file " + path);
  ResultsFile r;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (j.value("summary", false)) {
        r.model = j.at("model").get<std::string>();
        r.method = j.at("method").get<std::string>();
        continue;
      }
      if (j.contains("skipped")) continue;
      r.outcomes.push_back({j.at("success").get<bool>(), j.at("nor").get<double>()});
      r.originals.push_back(j.at("src").get<std::string>());
      r.adversarials.push_back(j.at("adv_src").get<std::string>());
    } catch (const json::exception& e) {
      throw FormatError(path + ": line " + std::to_string(no) + ": " + e.what());
    }
  }
  if (r.method.empty()) throw FormatError(path + ": no summary line");
  return r;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

void cmd_report(const ReportArgs& a, std::ostream& out) {
  std::vector<EvalReport> reports;
  std::string extra;
  if (!a.bleu_rows.empty()) {
    std::ostringstream t;
    t << "| model | pair | method | published e(M) | recomputed e(M) | difference |\n|---|---|---|---:|---:|---:|\n";
    for (const auto& row : read_bleu_rows(a.bleu_rows)) {
      EvalReport r;
      r.model = row.model + " " + row.pair;
      r.method = row.method;
      r.has_bleu = true;
      r.b_src = row.b_src;
      r.b = row.b;
      r.e = r.recompute_e();
      t << "| " << row.model << " | " << row.pair << " | " << row.method << " | " << std::fixed << std::setprecision(2)
        << row.e << " | " << std::setprecision(3) << r.e << " | " << std::showpos
        << std::round((r.e - row.e) * 1000.0) / 1000.0 + 0.0 << std::noshowpos << " |\n";
      reports.push_back(std::move(r));
    }
    extra = t.str();
  }

  std::vector<Checkpoint> fleet;
  for (const auto& p : a.fleet) {
    require_file(p);
    fleet.push_back(load_checkpoint(p));
  }
  std::vector<FleetMember> members;
  for (std::size_t m = 0; m < fleet.size(); ++m) {
    const auto& c = fleet[m];
    members.push_back({c.metadata.count("name") ? c.metadata.at("name") : fs::path(a.fleet[m]).stem().string(),
                       &c.model, &c.tokenizer});
  }
  if (!members.empty() && a.attacked >= members.size())
    throw InputError("--attacked " + std::to_string(a.attacked) + " is not a fleet index");

  for (const auto& path : a.results) {
    const ResultsFile rf = read_results(path);
    EvalReport r;
    r.model = rf.model;
    r.method = rf.method;
    r.sentences = rf.outcomes.size();
    if (!rf.outcomes.empty()) {
      r.success_rate = success_rate(rf.outcomes);
      const auto nor = nor_stats(rf.outcomes);
      r.nor_mean = nor.mean;
      r.nor_median = nor.median;
    }
    if (!members.empty() && !rf.outcomes.empty()) {
      const auto m = bleu_matrix(rf.originals, rf.adversarials, members, a.attacked, a.beam_width, !a.no_smoothing);
      r.has_bleu = true;
      r.b_src = m.b_src;
      r.b = m.b;
      r.e = r.recompute_e();
    }
    reports.push_back(std::move(r));
  }

  if (!a.csv.empty()) write_text(a.csv, report_csv(reports));
  if (!a.json_out.empty()) write_text(a.json_out, report_json(reports));
  const std::string md = report_markdown(reports) + (extra.empty() ? "" : "\n" + extra);
  if (!a.markdown.empty())
    write_text(a.markdown, md);
  else
    out << md;
}

// -- translate ---------------------------------------------------------------------------

struct TranslateArgs {
  std::string checkpoint, input;
  int beam_width = 5;
};

void cmd_translate(const TranslateArgs& a, std::istream& in, std::ostream& out) {
  require_file(a.checkpoint);
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  std::vector<std::string> lines;
  if (!a.input.empty()) {
    require_file(a.input);
    lines = read_lines(a.input);
  } else {
    for (std::string l; std::getline(in, l);) lines.push_back(l);
  }
  for (const auto& line : lines) {
    const TokenSeq s = ckpt.tokenizer.encode(line);
    if (s.ids.empty() || static_cast<int>(s.size()) > ckpt.model.config().max_len) {
      out << '\n';
      continue;
    }
    out << ckpt.tokenizer.decode(translate(ckpt.model, s.ids, a.beam_width).ids) << '\n';
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Invariance adversarial attacks on toy translation models"};
  app.set_version_flag("--version", NMTADV_VERSION);
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write a synthetic parallel corpus");
  s->add_option("--pairs", synth.pairs, "sentence pairs")->capture_default_str();
  s->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
  s->add_option("--src", synth.src, "source output file")->required();
  s->add_option("--tgt", synth.tgt, "target output file")->required();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model and write a checkpoint");
  Settings train_settings(t);
  t->add_option("--src", train.src, "source side of the corpus")->required();
  t->add_option("--tgt", train.tgt, "target side of the corpus")->required();
  t->add_option("--out", train.out, "checkpoint path")->required();
  t->add_option("--loss_csv", train.loss_csv, "loss curve (default <out>.loss.csv)");
  t->add_option("--manifest", train.manifest, "manifest path (default <out>.manifest.json)");
  t->add_option("--name", train.name, "model label stored in the checkpoint");
  train_settings.add("arch", train.arch, "recurrent | transformer");
  train_settings.add("merges", train.merges, "BPE merges");
  train_settings.add("embed_dim", train.embed_dim, "embedding width");
  train_settings.add("hidden_dim", train.hidden_dim, "hidden width");
  train_settings.add("layers", train.layers, "layers");
  train_settings.add("heads", train.heads, "attention heads (transformer)");
  train_settings.add("max_len", train.max_len, "maximum sentence length in tokens");
  train_settings.add("learning_rate", train.learning_rate, "learning rate");
  train_settings.add("epochs", train.epochs, "epochs");
  train_settings.add("batch_size", train.batch_size, "batch size");
  train_settings.add("seed", train.seed, "seed");
  train_settings.add("clip_norm", train.clip_norm, "gradient clip norm (<= 0 disables)");
  train_settings.add("optimizer", train.optimizer, "adam | sgd");
  train_settings.add("dev_frac", train.dev_frac, "fraction held out for dev loss");

  AttackArgs attack;
  auto* a = app.add_subcommand("attack", "Attack every sentence of a file; JSONL to --out or stdout");
  Settings attack_settings(a);
  a->add_option("--checkpoint", attack.checkpoint, "model checkpoint")->required();
  a->add_option("--sentences", attack.sentences, "one source sentence per line")->required();
  a->add_option("--out", attack.out, "JSONL output (default stdout)");
  a->add_option("--manifest", attack.manifest, "manifest path (default <out>.manifest.json)");
  a->add_option("--workers", attack.workers, "worker threads (default $NMTADV_WORKERS, else 1)");
  attack_settings.add("method", attack.method, "<min-grad|random>+<soft-att|hotflip>");
  attack_settings.add("max_sweep", attack.cfg.max_sweep, "sweeps over the sentence");
  attack_settings.add("max_iter", attack.cfg.max_iter, "soft-att iterations");
  attack_settings.add("max_prob", attack.cfg.max_prob, "soft-att dominance threshold");
  attack_settings.add("n_iter", attack.cfg.n_iter, "iterations the dominant word must hold");
  attack_settings.add("step", attack.cfg.step, "soft-att step size");
  attack_settings.add("l_min", attack.cfg.l_min, "initial min-loss threshold");
  attack_settings.add("loss_mode", attack.loss_mode, "hard | relaxed");
  attack_settings.add("update", attack.update, "softmax | simplex");
  attack_settings.add("beam_width", attack.cfg.beam_width, "beam width for t_org and t_adv");
  attack_settings.add("compare_text", attack.cfg.compare_text, "judge success on detokenised text");
  attack_settings.add("seed", attack.cfg.seed, "run seed");
  attack_settings.add("sample", attack.sample, "attack a seeded random sample of this many sentences (0 = all)");

  ReportArgs report;
  auto* r = app.add_subcommand("report", "Success rate, NOR, BLEU matrix and e(M) tables");
  r->add_option("--results", report.results, "attack JSONL files");
  r->add_option("--fleet", report.fleet, "checkpoints for the BLEU matrix");
  r->add_option("--attacked", report.attacked, "fleet index of the attacked model")->capture_default_str();
  r->add_option("--markdown", report.markdown, "markdown output (default stdout)");
  r->add_option("--csv", report.csv, "CSV output");
  r->add_option("--json", report.json_out, "JSON output");
  r->add_option("--bleu_rows", report.bleu_rows, "CSV of precomputed BLEU rows (e.g. data/reference_bleu.csv)");
  r->add_option("--beam_width", report.beam_width, "beam width for fleet translations")->capture_default_str();
  r->add_flag("--no_smoothing", report.no_smoothing, "unsmoothed BLEU");

  TranslateArgs tr;
  auto* x = app.add_subcommand("translate", "Translate sentences with a checkpoint");
  x->add_option("--checkpoint", tr.checkpoint, "model checkpoint")->required();
  x->add_option("--input", tr.input, "input file (default stdin)");
  x->add_option("--beam_width", tr.beam_width, "beam width")->capture_default_str();

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << NMTADV_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front())
      err << "run with " << sub->get_name() << " --help for usage\n";
    return kExitUsage;
  }

  try {
    if (s->parsed()) {
      cmd_synth(synth, out);
    } else if (t->parsed()) {
      train_settings.apply_config();
      cmd_train(train, train_settings, args, out);
    } else if (a->parsed()) {
      attack_settings.apply_config();
      cmd_attack(attack, args, out, err);
    } else if (r->parsed()) {
      if (report.results.empty() && report.bleu_rows.empty()) throw InputError("report needs --results or --bleu_rows");
      cmd_report(report, out);
    } else if (x->parsed()) {
      cmd_translate(tr, std::cin, out);
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace nmtadv::cli
