#include "commands.hpp"

#include "config.hpp"

#include "imt/corpus/corpus.hpp"
#include "imt/model/translation_model.hpp"
#include "imt/service/service.hpp"
#include "imt/sim/bleu.hpp"
#include "imt/sim/pipeline.hpp"
#include "imt/sim/simulator.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <pthread.h>
#include <sstream>
#include <thread>

namespace imt::cli {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Config flags shared by every subcommand.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  bool no_memory = false;
  bool no_online = false;
  bool global_online = false;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_file, "JSON config file (overridden by IMT_* variables and flags)");
    const std::map<std::string, std::string> help = {
        {"seed", "random seed"},
        {"beam", "beam size"},
        {"memory_capacity", "revision memory capacity"},
        {"memory_threshold", "revisions before the memory is read"},
        {"online_lr", "learning rate of per-round online updates"},
        {"strategy", "regeneration strategy: unidir, unidir_g or bidir"},
        {"budget", "maximum revisions per sentence"},
        {"vocab_size", "vocabulary size per side, reserved tokens included"},
        {"epochs", "training epochs"},
        {"batch_size", "training batch size"},
        {"lr", "training learning rate"},
        {"memory_epochs", "memory gate training epochs"},
        {"memory_lr", "memory gate learning rate"},
    };
    for (const auto& [key, value] : LayeredConfig::defaults().items()) {
      if (value.is_boolean()) continue;
      std::string flag = key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      const auto h = help.find(key);
      cmd.add_option_function<std::string>(
          "--" + flag, [this, k = key](const std::string& v) { values[k] = v; },
          h == help.end() ? "config key " + key : h->second);
    }
    cmd.add_flag("--no-memory", no_memory, "disable the revision memory");
    cmd.add_flag("--no-online", no_online, "disable per-round online learning");
    cmd.add_flag("--global-online", global_online, "carry online updates across simulated sessions");
  }

  LayeredConfig resolve(const std::function<const char*(const char*)>& env) const {
    LayeredConfig c;
    if (!config_file.empty()) c.merge_file(config_file);
    c.merge_env(env);
    for (const auto& [key, value] : values) c.set(key, value);
    if (no_memory) c.set("memory", "false");
    if (no_online) c.set("online", "false");
    if (global_online) c.set("global_online", "true");
    c.session_options();  // validates the strategy name and sizes
    return c;
  }
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(precision);
  s << v;
  return s.str();
}

ParallelCorpus load_split(const fs::path& dir, const std::string& prefix) {
  if (!fs::exists(dir / (prefix + ".src"))) {
    throw std::runtime_error("no corpus '" + prefix + "' in " + dir.string());
  }
  return read_corpus(dir, prefix);
}

std::shared_ptr<const TranslationModel> load_model(const fs::path& path) {
  return std::make_shared<const TranslationModel>(load_translation_model(path));
}

int cmd_gen(const fs::path& spec_path, const fs::path& out_dir, const std::string& prefix, const LayeredConfig& config,
            std::ostream& out) {
  SyntheticSpec spec = SyntheticSpec::load(spec_path);
  if (config.is_set("seed")) spec.seed = config.seed();
  const ParallelCorpus corpus = generate(spec);
  write_corpus(out_dir, prefix, corpus);
  std::ofstream(out_dir / (prefix + ".spec.json")) << spec.to_json() << '\n';
  out << "wrote " << corpus.pairs.size() << " pairs in " << corpus.sessions.size() << " sessions to "
      << (out_dir / prefix).string() << ".{src,tgt,sessions,rare}\n";
  return 0;
}

int cmd_train(const fs::path& dir, const std::string& prefix, const std::string& heldout, const fs::path& out_path,
              fs::path loss_path, const LayeredConfig& config, std::ostream& out, std::ostream& err) {
  const ParallelCorpus corpus = load_split(dir, prefix);
  PipelineOptions options = config.pipeline_options();
  options.training.on_epoch = [&](std::size_t epoch, double loss) {
    err << "epoch " << epoch + 1 << "/" << options.training.epochs << " joint loss " << fmt(loss) << '\n';
  };
  PipelineReport report;
  const TranslationModel tm = train_translation_model(corpus, options, &report);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  save_translation_model(out_path, tm);
  tm.source_vocab.save(out_path.string() + ".src.vocab");
  tm.target_vocab.save(out_path.string() + ".tgt.vocab");

  if (loss_path.empty()) loss_path = out_path.string() + ".loss.tsv";
  std::ofstream curve(loss_path);
  if (!curve) throw std::runtime_error("cannot write " + loss_path.string());
  curve << "phase\tepoch\tloss\n";
  for (std::size_t e = 0; e < report.training.loss_curve.size(); ++e) {
    curve << "joint\t" << e + 1 << '\t' << report.training.loss_curve[e] << '\n';
  }
  for (std::size_t e = 0; e < report.memory.epoch_loss.size(); ++e) {
    curve << "memory\t" << e + 1 << '\t' << report.memory.epoch_loss[e] << '\n';
  }

  out << "saved " << out_path.string() << " (" << corpus.pairs.size() << " pairs, vocab " << tm.source_vocab.size()
      << "/" << tm.target_vocab.size() << ")\n";
  out << "final joint loss " << fmt(report.training.loss_curve.back()) << "; loss curve " << loss_path.string() << '\n';
  if (options.train_memory && !report.memory.epoch_loss.empty()) {
    out << "memory gate: mean " << fmt(report.memory.mean_gate_gold_in_memory) << " when the gold word is in memory, "
        << fmt(report.memory.mean_gate_gold_absent) << " otherwise\n";
  }
  const auto train_pairs = encode_pairs(corpus, tm.source_vocab, tm.target_vocab);
  out << "training token accuracy " << fmt(token_accuracy(tm.model, train_pairs)) << '\n';
  if (fs::exists(dir / (heldout + ".src"))) {
    const auto test_pairs = encode_pairs(read_corpus(dir, heldout), tm.source_vocab, tm.target_vocab);
    out << "held-out token accuracy " << fmt(token_accuracy(tm.model, test_pairs)) << '\n';
  }
  return 0;
}

int cmd_simulate(const fs::path& checkpoint, const fs::path& dir, const std::string& prefix, bool all_strategies,
                 bool ablation, const fs::path& json_path, const LayeredConfig& config, std::ostream& out,
                 std::ostream& err) {
  const auto model = load_model(checkpoint);
  const ParallelCorpus test = load_split(dir, prefix);
  const SimulationOptions base = config.simulation_options();
  std::vector<Strategy> strategies = {base.session.strategy};
  if (all_strategies) strategies = {Strategy::kUniDir, Strategy::kUniDirGrid, Strategy::kBiDir};
  std::vector<std::pair<bool, bool>> toggles = {{base.session.memory, base.session.online_learning}};
  if (ablation) toggles = {{false, false}, {true, false}, {false, true}, {true, true}};

  std::vector<SimulationMetrics> runs;
  for (const Strategy s : strategies) {
    for (const auto& [memory, online] : toggles) {
      SimulationOptions o = base;
      o.session.strategy = s;
      o.session.memory = memory;
      o.session.online_learning = online;
      err << "simulating " << strategy_name(s) << (memory ? " +mem" : "") << (online ? " +ol" : "") << " on "
          << test.pairs.size() << " sentences\n";
      runs.push_back(run_ideal_session(model, test, o));
    }
  }
  out << format_report(runs);
  if (!json_path.empty()) {
    std::ofstream j(json_path);
    if (!j) throw std::runtime_error("cannot write " + json_path.string());
    j << metrics_to_json(runs) << '\n';
  }
  return 0;
}

int cmd_decode(const fs::path& checkpoint, const std::string& input, const std::string& reference,
               const LayeredConfig& config, std::ostream& out, std::ostream& err) {
  const auto model = load_model(checkpoint);
  SessionOptions o = config.session_options();
  o.memory = false;
  o.online_learning = false;
  Session session(model, o, "decode");
  std::ifstream file;
  if (input != "-") {
    file.open(input);
    if (!file) throw std::runtime_error("cannot read " + input);
  }
  std::istream& in = input == "-" ? std::cin : file;
  std::vector<Sentence> hyps;
  for (std::string line; std::getline(in, line);) {
    const Sentence src = tokenize(line);
    Sentence hyp;
    if (!src.empty()) hyp = session.render(session.translate(src).initial);
    out << detokenize(hyp) << '\n';
    hyps.push_back(std::move(hyp));
  }
  if (!reference.empty()) {
    std::ifstream ref_in(reference);
    if (!ref_in) throw std::runtime_error("cannot read " + reference);
    std::vector<Sentence> refs;
    for (std::string line; std::getline(ref_in, line);) refs.push_back(tokenize(line));
    if (refs.size() != hyps.size()) {
      throw std::runtime_error("reference has " + std::to_string(refs.size()) + " lines, input " +
                               std::to_string(hyps.size()));
    }
    err << "BLEU " << fmt(100.0 * corpus_bleu(hyps, refs), 2) << '\n';
  }
  return 0;
}

int cmd_serve(const fs::path& checkpoint, const std::string& host, int port, const fs::path& transcripts,
              const fs::path& static_dir, const LayeredConfig& config, std::ostream& out, std::ostream& err) {
  if (port < 0 || port > 65535) throw UsageError("port must be in 0..65535");
  std::shared_ptr<CheckpointRegistry> registry;
  if (fs::is_directory(checkpoint)) {
    registry = std::make_shared<CheckpointRegistry>(checkpoint);
  } else {
    registry = std::make_shared<CheckpointRegistry>();
    registry->add(checkpoint.stem().string(), load_model(checkpoint));
  }
  ServiceOptions options;
  options.transcript_dir = transcripts;
  options.static_dir = static_dir;
  options.defaults = config.session_options();
  TranslationService service(registry, options);
  std::vector<std::string> failures;
  const std::size_t restored = service.restore(&failures);
  for (const auto& f : failures) err << "skipped transcript " << f << '\n';

  // Signals are taken synchronously by a waiter thread; server threads inherit the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  HttpFrontend http(service);
  const int bound = http.bind(host, port);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    http.stop();
  });
  out << "listening on http://" << host << ":" << bound << " (" << restored << " sessions restored)" << std::endl;
  http.serve();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
        const std::function<const char*(const char*)>& env) {
  CLI::App app{"Interactive machine translation workbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "imt 0.1.0");
  std::function<int(const LayeredConfig&)> action;

  ConfigFlags gen_flags, train_flags, sim_flags, serve_flags, decode_flags;

  auto* gen = app.add_subcommand("gen", "generate a synthetic parallel corpus");
  std::string spec_path, gen_out, gen_prefix = "corpus";
  gen->add_option("spec", spec_path, "corpus spec (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("out", gen_out, "output directory")->required();
  gen->add_option("--prefix", gen_prefix, "file name prefix")->capture_default_str();
  gen_flags.attach(*gen);
  gen->callback([&] {
    action = [&](const LayeredConfig& c) { return cmd_gen(spec_path, gen_out, gen_prefix, c, out); };
  });

  auto* train = app.add_subcommand("train", "train the translation model and the memory gate");
  std::string train_dir, train_out, train_prefix = "train", heldout_prefix = "test", loss_path;
  train->add_option("corpus", train_dir, "corpus directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("-o,--out", train_out, "checkpoint to write")->required();
  train->add_option("--prefix", train_prefix, "training split prefix")->capture_default_str();
  train->add_option("--heldout", heldout_prefix, "held-out split prefix, used when present")->capture_default_str();
  train->add_option("--loss-curve", loss_path, "loss curve file (default <out>.loss.tsv)");
  train_flags.attach(*train);
  train->callback([&] {
    action = [&](const LayeredConfig& c) {
      return cmd_train(train_dir, train_prefix, heldout_prefix, train_out, loss_path, c, out, err);
    };
  });

  auto* sim = app.add_subcommand("simulate", "run the ideal-environment simulation and print a report");
  std::string sim_ckpt, sim_dir, sim_prefix = "test", sim_json;
  bool all_strategies = false, ablation = false;
  sim->add_option("checkpoint", sim_ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
  sim->add_option("corpus", sim_dir, "directory with the test split")->required()->check(CLI::ExistingDirectory);
  sim->add_option("--prefix", sim_prefix, "test split prefix")->capture_default_str();
  sim->add_option("--json", sim_json, "also write metrics as JSON");
  sim->add_flag("--all-strategies", all_strategies, "run unidir, unidir_g and bidir");
  sim->add_flag("--ablation", ablation, "run every memory/online-learning combination");
  sim_flags.attach(*sim);
  sim->callback([&] {
    action = [&](const LayeredConfig& c) {
      return cmd_simulate(sim_ckpt, sim_dir, sim_prefix, all_strategies, ablation, sim_json, c, out, err);
    };
  });

  auto* decode = app.add_subcommand("decode", "translate lines with plain beam search");
  std::string dec_ckpt, dec_input = "-", dec_ref;
  decode->add_option("checkpoint", dec_ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
  decode->add_option("input", dec_input, "source lines, '-' for stdin")->capture_default_str();
  decode->add_option("--reference", dec_ref, "reference lines; prints corpus BLEU to stderr");
  decode_flags.attach(*decode);
  decode->callback([&] {
    action = [&](const LayeredConfig& c) { return cmd_decode(dec_ckpt, dec_input, dec_ref, c, out, err); };
  });

  auto* serve = app.add_subcommand("serve", "serve the HTTP API (and UI assets)");
  std::string serve_ckpt, host = "127.0.0.1", transcripts = "transcripts", static_dir;
  int port = 8080;
  serve->add_option("checkpoint", serve_ckpt, "checkpoint file or directory of *.bin checkpoints")
      ->required()
      ->check(CLI::ExistingPath);
  serve->add_option("--host", host, "address to bind")->capture_default_str();
  serve->add_option("--port", port, "port, 0 for any free port")->capture_default_str();
  serve->add_option("--transcripts", transcripts, "session transcript directory")->capture_default_str();
  serve->add_option("--static", static_dir, "UI assets served under /")->check(CLI::ExistingDirectory);
  serve_flags.attach(*serve);
  serve->callback([&] {
    action = [&](const LayeredConfig& c) {
      return cmd_serve(serve_ckpt, host, port, transcripts, static_dir, c, out, err);
    };
  });

  const std::map<CLI::App*, ConfigFlags*> flags_of = {
      {gen, &gen_flags}, {train, &train_flags}, {sim, &sim_flags}, {decode, &decode_flags}, {serve, &serve_flags}};

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "imt: usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    LayeredConfig config;
    try {
      config = flags_of.at(app.get_subcommands().front())->resolve(env);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return action(config);
  } catch (const UsageError& e) {
    err << "imt: usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "imt: error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace imt::cli
