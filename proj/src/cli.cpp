#include "mce/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "mce/corpus.hpp"
#include "mce/error.hpp"
#include "mce/eval.hpp"
#include "mce/io.hpp"
#include "mce/synthgen.hpp"
#include "mce/trainer.hpp"

namespace fs = std::filesystem;

namespace mce::cli {

namespace {

struct TrainPaths {
  std::string corpus;
  std::string vocab;
  std::string embeddings;
  std::string attention;
  std::string report;
  std::string model;
  bool output_vectors = false;
};

struct EvalPaths {
  std::string embeddings;
  std::string clusters;
  std::string neighbors;
  std::string out;
};

struct SweepSpec {
  std::string param = "gamma";
  std::vector<long> values;
  std::vector<std::string> modes{"mce"};
  std::string out;
};

void require_input(const std::string& path, const std::string& what) {
  if (path.empty()) return;
  if (!fs::is_regular_file(path)) throw UsageError(what + " '" + path + "' does not exist");
}

void require_output(const std::string& path, const std::string& what) {
  if (path.empty()) return;
  fs::path parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw UsageError(what + " directory '" + parent.string() + "' does not exist");
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

void set_threads(int threads) {
#ifdef _OPENMP
  omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

void add_train_flags(CLI::App* app, TrainConfig& c, std::string* mode) {
  app->add_option("--dim", c.dim, "Embedding dimension d")->check(CLI::PositiveNumber);
  app->add_option("--scope", c.scope, "Temporal scope S in time units")->check(CLI::NonNegativeNumber);
  app->add_option("--gamma", c.gamma, "Context threshold: max contexts per target")
      ->check(CLI::PositiveNumber);
  app->add_option("--negative", c.negatives, "Negative samples per target")->check(CLI::PositiveNumber);
  app->add_option("--alpha", c.alpha, "Starting learning rate (linear decay)")->check(CLI::PositiveNumber);
  app->add_option("--epochs", c.epochs, "Passes over the corpus (30 for small corpora, 5 for large)")
      ->check(CLI::PositiveNumber);
  app->add_option("--min-count", c.min_count, "Discard codes seen fewer times")->check(CLI::PositiveNumber);
  app->add_option("--sample", c.sample_threshold, "Subsampling threshold t")->check(CLI::PositiveNumber);
  app->add_option("--time-unit", c.time_unit_days, "Days per time unit")->check(CLI::PositiveNumber);
  app->add_option("--threads", c.workers, "Training workers")->check(CLI::PositiveNumber);
  app->add_option("--seed", c.seed, "Random seed");
  if (mode) {
    app->add_option("--mode", *mode, "Model: mce or cbow")->check(CLI::IsMember({"mce", "cbow"}));
  }
  app->add_flag("--freeze-attention", c.freeze_attention, "Keep attention scores at zero");
  app->add_flag("--shuffle", c.shuffle, "Shuffle entity order every epoch");
}

void add_eval_flags(CLI::App* app, EvalOptions& e) {
  app->add_option("--k", e.k, "Clusters for k-means (0: number of labels)");
  app->add_option("--restarts", e.restarts, "k-means++ restarts")->check(CLI::PositiveNumber);
  app->add_option("--max-iters", e.max_iters, "Lloyd iterations per restart")->check(CLI::PositiveNumber);
  app->add_option("--eval-seed", e.seed, "k-means seed");
}

Corpus load_corpus(const TrainPaths& paths, const TrainConfig& config) {
  auto raw = read_events_file(paths.corpus);
  EncodedCorpus encoded;
  if (!paths.vocab.empty()) {
    std::ifstream in(paths.vocab);
    encoded.vocab = read_vocab(in);
    encoded.records = encode(raw, encoded.vocab);
  } else {
    encoded = build_vocab(raw, config.min_count);
  }
  return make_corpus(encoded, config.time_unit_days);
}

TrainResult<float> run_training(const Corpus& corpus, const TrainConfig& config,
                                std::ostream& err) {
  err << "training " << to_string(config.mode) << ": " << corpus.vocab.size() << " codes, "
      << corpus.sequences.size() << " entities, " << config.epochs << " epochs\n";
  return train<float>(corpus, config, [&](int epoch, double loss, std::uint64_t steps) {
    err << "epoch " << epoch + 1 << "/" << config.epochs << " mean loss " << loss << " steps "
        << steps << '\n';
  });
}

Matrix to_matrix(const ModelParams<float>& p) {
  Matrix m(p.vocab_size, p.dim);
  std::copy(p.input.begin(), p.input.end(), m.data.begin());
  return m;
}

int cmd_gen_synth(const SynthConfig& config, const std::vector<std::string>& profiles,
                  const std::string& out_dir, std::ostream& err) {
  SynthConfig c = config;
  for (const auto& p : profiles) c.profiles.push_back(parse_profile(p));
  c.validate();
  if (!fs::is_directory(out_dir)) fs::create_directories(out_dir);
  auto corpus = generate(c);
  fs::path dir(out_dir);
  {
    auto f = open_out((dir / "corpus.tsv").string());
    write_events(f, corpus.records);
  }
  {
    auto f = open_out((dir / "clusters.tsv").string());
    write_group_labels(f, corpus);
  }
  {
    auto f = open_out((dir / "neighbors.tsv").string());
    write_group_labels(f, corpus);
  }
  {
    auto f = open_out((dir / "manifest.json").string());
    f << manifest_json(c, corpus);
  }
  err << "wrote " << corpus.records.size() << " entities, " << corpus.n_events << " events to "
      << out_dir << '\n';
  return kExitOk;
}

int cmd_build_vocab(const std::string& corpus_path, std::uint64_t min_count,
                    const std::string& out_path, std::ostream& out) {
  auto encoded = build_vocab(read_events_file(corpus_path), min_count);
  if (out_path.empty()) {
    write_vocab(out, encoded.vocab);
  } else {
    auto f = open_out(out_path);
    write_vocab(f, encoded.vocab);
  }
  return kExitOk;
}

int cmd_train(const TrainPaths& paths, const TrainConfig& config, std::ostream& err) {
  auto corpus = load_corpus(paths, config);
  auto result = run_training(corpus, config, err);
  const auto& codes = corpus.vocab.codes();
  {
    auto f = open_out(paths.embeddings);
    write_embeddings(f, codes, result.params,
                     paths.output_vectors ? VectorSet::output : VectorSet::input);
  }
  if (!paths.attention.empty()) {
    auto f = open_out(paths.attention);
    write_attention_csv(f, codes, result.params);
  }
  if (!paths.report.empty()) {
    auto f = open_out(paths.report);
    f << report_json(result.report);
  }
  if (!paths.model.empty()) {
    auto f = open_out(paths.model);
    save_model(f, codes, result.params);
  }
  return kExitOk;
}

int cmd_eval(const EvalPaths& paths, const EvalOptions& options, std::ostream& out) {
  auto emb = read_embeddings_file(paths.embeddings);
  auto truth = load_ground_truth(paths.clusters, paths.neighbors, emb.codes);
  auto metrics = evaluate(emb.vectors, truth, options);
  if (paths.out.empty()) {
    out << metrics_json(metrics);
  } else {
    auto f = open_out(paths.out);
    f << metrics_json(metrics);
  }
  return kExitOk;
}

int cmd_export_attention(const std::string& model_path, const std::string& out_path,
                         std::ostream& out) {
  std::ifstream in(model_path);
  auto model = load_model(in);
  if (out_path.empty()) {
    write_attention_csv(out, model.codes, model.params);
  } else {
    auto f = open_out(out_path);
    write_attention_csv(f, model.codes, model.params);
  }
  return kExitOk;
}

int cmd_sweep(const TrainPaths& paths, const EvalPaths& eval_paths, const TrainConfig& base,
              const EvalOptions& eval_options, const SweepSpec& sweep, std::ostream& out,
              std::ostream& err) {
  if (sweep.values.empty()) throw UsageError("--values needs at least one value");
  auto raw = read_events_file(paths.corpus);
  auto encoded = build_vocab(raw, base.min_count);

  std::ostringstream csv;
  csv << "mode,param,value,nmi,p_at_1,final_loss,targets,attention_ops\n";
  for (const auto& mode : sweep.modes) {
    for (long value : sweep.values) {
      TrainConfig c = base;
      c.mode = parse_mode(mode);
      if (sweep.param == "gamma") {
        if (value < 1) throw UsageError("gamma values must be >= 1");
        c.gamma = static_cast<std::size_t>(value);
      } else {
        if (value < 0) throw UsageError("scope values must be >= 0");
        c.scope = static_cast<int>(value);
      }
      auto corpus = make_corpus(encoded, c.time_unit_days);
      auto result = run_training(corpus, c, err);
      auto truth = load_ground_truth(eval_paths.clusters, eval_paths.neighbors, corpus.vocab.codes());
      auto metrics = evaluate(to_matrix(result.params), truth, eval_options);
      csv << mode << ',' << sweep.param << ',' << value << ',' << format_real(metrics.nmi) << ','
          << format_real(metrics.p_at_1) << ','
          << format_real(result.report.mean_loss_per_epoch.back()) << ','
          << result.report.targets << ',' << result.report.attention_ops << '\n';
      err << mode << ' ' << sweep.param << '=' << value << " nmi " << metrics.nmi << " p@1 "
          << metrics.p_at_1 << '\n';
    }
  }
  if (sweep.out.empty()) {
    out << csv.str();
  } else {
    auto f = open_out(sweep.out);
    f << csv.str();
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Time-aware code embeddings from timestamped event sequences", "mce"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  SynthConfig synth;
  std::vector<std::string> profiles;
  std::string synth_dir;
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic corpus with planted structure");
  gen->add_option("--out-dir", synth_dir, "Output directory")->required();
  gen->add_option("--seed", synth.seed, "Random seed");
  gen->add_option("--groups", synth.n_groups, "Code groups")->check(CLI::PositiveNumber);
  gen->add_option("--codes-per-group", synth.codes_per_group, "Codes per group")->check(CLI::PositiveNumber);
  gen->add_option("--profiles", profiles, "Per-group profile (peak|stable|sequela); default cycles");
  gen->add_option("--entities", synth.n_entities, "Entities")->check(CLI::PositiveNumber);
  gen->add_option("--episodes", synth.episodes_per_entity, "Poisson mean episodes per entity")
      ->check(CLI::PositiveNumber);
  gen->add_option("--horizon", synth.horizon_units, "Episode start horizon in units")
      ->check(CLI::PositiveNumber);
  gen->add_option("--noise", synth.noise_rate, "Background code rate per occupied unit")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_option("--noise-pool", synth.noise_pool, "Background codes");
  gen->add_option("--visit-rate", synth.visit_rate, "Chance a unit is a visit (gaps below 1)")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_option("--unit-days", synth.unit_days, "Days per unit")->check(CLI::PositiveNumber);

  std::string vocab_corpus, vocab_out;
  std::uint64_t vocab_min_count = 5;
  auto* bv = app.add_subcommand("build-vocab", "Build the vocabulary file of a corpus");
  bv->add_option("--corpus", vocab_corpus, "Corpus file")->required();
  bv->add_option("--min-count", vocab_min_count, "Discard codes seen fewer times")
      ->check(CLI::PositiveNumber);
  bv->add_option("--out", vocab_out, "Vocabulary file (default: stdout)");

  TrainConfig tc;
  std::string mode = "mce";
  TrainPaths tp;
  auto* tr = app.add_subcommand("train", "Train embeddings");
  tr->add_option("--corpus", tp.corpus, "Corpus file")->required();
  tr->add_option("--vocab", tp.vocab, "Vocabulary file (default: built from the corpus)");
  tr->add_option("--embeddings", tp.embeddings, "Embedding output file")->required();
  tr->add_option("--attention", tp.attention, "Attention profile CSV output");
  tr->add_option("--report", tp.report, "Training report JSON output");
  tr->add_option("--model", tp.model, "Full model output (for export-attention)");
  tr->add_flag("--output-vectors", tp.output_vectors, "Export output vectors instead of inputs");
  add_train_flags(tr, tc, &mode);

  EvalOptions eo;
  EvalPaths ep;
  int eval_threads = 1;
  auto* ev = app.add_subcommand("eval", "Score embeddings by clustering NMI and P@1");
  ev->add_option("--embeddings", ep.embeddings, "Embedding file")->required();
  ev->add_option("--clusters", ep.clusters, "code<TAB>category file")->required();
  ev->add_option("--neighbors", ep.neighbors, "code<TAB>subcategory file")->required();
  ev->add_option("--out", ep.out, "Metrics JSON output (default: stdout)");
  ev->add_option("--threads", eval_threads, "Evaluation threads")->check(CLI::PositiveNumber);
  add_eval_flags(ev, eo);

  std::string model_path, attn_out;
  auto* ex = app.add_subcommand("export-attention", "Write attention profiles of a saved model");
  ex->add_option("--model", model_path, "Model file written by train --model")->required();
  ex->add_option("--out", attn_out, "CSV output (default: stdout)");

  TrainConfig sc;
  TrainPaths sp;
  EvalPaths sep;
  EvalOptions seo;
  SweepSpec sweep;
  auto* sw = app.add_subcommand("sweep", "Train and evaluate over a list of gamma or scope values");
  sw->add_option("--corpus", sp.corpus, "Corpus file")->required();
  sw->add_option("--clusters", sep.clusters, "code<TAB>category file")->required();
  sw->add_option("--neighbors", sep.neighbors, "code<TAB>subcategory file")->required();
  sw->add_option("--param", sweep.param, "Swept parameter")->check(CLI::IsMember({"gamma", "scope"}));
  sw->add_option("--values", sweep.values, "Comma-separated values")->required()->delimiter(',');
  sw->add_option("--modes", sweep.modes, "Comma-separated models to run")
      ->delimiter(',')
      ->check(CLI::IsMember({"mce", "cbow"}));
  sw->add_option("--out", sweep.out, "CSV output (default: stdout)");
  add_train_flags(sw, sc, nullptr);
  add_eval_flags(sw, seo);

  std::vector<std::string> storage{"mce"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      require_output(synth_dir, "output");
      return cmd_gen_synth(synth, profiles, synth_dir, err);
    }
    if (bv->parsed()) {
      require_input(vocab_corpus, "corpus");
      require_output(vocab_out, "vocabulary");
      return cmd_build_vocab(vocab_corpus, vocab_min_count, vocab_out, out);
    }
    if (tr->parsed()) {
      tc.mode = parse_mode(mode);
      tc.validate();
      require_input(tp.corpus, "corpus");
      require_input(tp.vocab, "vocabulary");
      for (const auto* p : {&tp.embeddings, &tp.attention, &tp.report, &tp.model}) {
        require_output(*p, "output");
      }
      return cmd_train(tp, tc, err);
    }
    if (ev->parsed()) {
      require_input(ep.embeddings, "embeddings");
      require_input(ep.clusters, "cluster labels");
      require_input(ep.neighbors, "neighbor labels");
      require_output(ep.out, "metrics");
      set_threads(eval_threads);
      return cmd_eval(ep, eo, out);
    }
    if (ex->parsed()) {
      require_input(model_path, "model");
      require_output(attn_out, "attention");
      return cmd_export_attention(model_path, attn_out, out);
    }
    if (sw->parsed()) {
      sc.validate();
      require_input(sp.corpus, "corpus");
      require_input(sep.clusters, "cluster labels");
      require_input(sep.neighbors, "neighbor labels");
      require_output(sweep.out, "sweep");
      set_threads(sc.workers);
      return cmd_sweep(sp, sep, sc, seo, sweep, out, err);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace mce::cli
