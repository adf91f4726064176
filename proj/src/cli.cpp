#include "hltmc/cli.hpp"

#include <omp.h>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hltmc/corpus.hpp"
#include "hltmc/error.hpp"
#include "hltmc/evaluation.hpp"
#include "hltmc/learning.hpp"
#include "hltmc/model.hpp"
#include "hltmc/model_io.hpp"
#include "hltmc/sampling.hpp"
#include "hltmc/structure.hpp"
#include "hltmc/topics.hpp"

namespace hltmc {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

class Manifest {
 public:
  explicit Manifest(std::string subcommand) : start_(Clock::now()) {
    doc_["tool"] = "hltmc";
    doc_["version"] = std::string(kToolVersion);
    doc_["subcommand"] = std::move(subcommand);
    doc_["inputs"] = json::object();
    doc_["outputs"] = json::array();
    doc_["seeds"] = json::object();
    doc_["timings"] = json::object();
  }

  void config(const CLI::App& app) {
    json cfg = json::object();
    for (const CLI::Option* opt : app.get_options()) {
      const std::string name = opt->get_single_name();
      if (name == "help" || name.empty()) continue;
      if (opt->count() > 0) {
        const auto& results = opt->results();
        cfg[name] = results.size() == 1 ? json(results[0]) : json(results);
      } else {
        cfg[name] = opt->get_default_str();
      }
    }
    doc_["config"] = std::move(cfg);
  }
  void argv(const std::vector<std::string>& args) { doc_["argv"] = args; }
  void input(const fs::path& path) { doc_["inputs"][path.string()] = "fnv1a64:" + hex64(file_digest(path)); }
  void output(const fs::path& path) { doc_["outputs"].push_back(path.string()); }
  void seed(const std::string& name, std::uint64_t value) { doc_["seeds"][name] = value; }
  void phase(const std::string& name, Clock::time_point t0) { doc_["timings"][name] = seconds_since(t0); }
  void set(const std::string& key, json value) { doc_[key] = std::move(value); }

  void write(const std::optional<fs::path>& path, std::ostream& err) {
    doc_["workers"] = omp_get_max_threads();
    doc_["timings"]["total"] = seconds_since(start_);
    if (path) {
      std::ofstream out(*path);
      if (!out) throw DataError("cannot write " + path->string());
      out << doc_.dump(2) << '\n';
    } else {
      err << "manifest: " << doc_.dump() << '\n';
    }
  }

 private:
  json doc_;
  Clock::time_point start_;
};

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) { open_output(path) << text; }

CountCorpus load_corpus(const fs::path& docword, const fs::path& vocab, Manifest& manifest) {
  manifest.input(docword);
  manifest.input(vocab);
  return load_uci_bow(docword, vocab);
}

TfidfAverage parse_average(const std::string& name) {
  return name == "containing" ? TfidfAverage::containing_documents : TfidfAverage::all_documents;
}

struct FitOptions {
  FitConfig config;
  std::string mode = "batch";
};

void add_fit_options(CLI::App* sub, FitOptions& fit) {
  sub->add_option("--mode", fit.mode, "batch (full EM) or stepwise")
      ->check(CLI::IsMember({"batch", "stepwise"}))
      ->capture_default_str();
  sub->add_option("--max-iters", fit.config.max_iters, "EM iterations per restart")->capture_default_str();
  sub->add_option("--tolerance", fit.config.tolerance, "relative per-document log-likelihood change")
      ->capture_default_str();
  sub->add_option("--sigma-floor", fit.config.sigma_floor, "lower bound on leaf std-devs")->capture_default_str();
  sub->add_option("--restarts", fit.config.restarts, "random restarts, best kept")->capture_default_str();
  sub->add_option("--minibatch", fit.config.minibatch, "stepwise minibatch size")->capture_default_str();
  sub->add_option("--step-exponent", fit.config.step_exponent, "stepwise eta_t = (t+2)^-exponent")
      ->capture_default_str();
  sub->add_option("--epochs", fit.config.epochs, "stepwise passes over the data")->capture_default_str();
}

struct TrainedModel {
  TreeStructure structure;
  HltmcModel model;
  FitResult fit;
  std::size_t dropped = 0;
};

TrainedModel train_model(const CountCorpus& corpus, TreeStructure structure, const FitOptions& fit,
                         std::ostream& log, Manifest& manifest) {
  fit.config.validate();
  auto t0 = Clock::now();
  const RelFreqCorpus docs = counts_to_relfreq(corpus);
  const TraceCallback on_trace = [&log](const TraceEntry& e) {
    log << json{{"restart", e.restart},
                {"iteration", e.iteration},
                {"per_doc_loglik", e.per_doc_loglik},
                {"seconds", e.seconds},
                {"floored_sigmas", e.floored_sigmas}}
               .dump()
        << '\n';
  };
  FitResult result = fit.mode == "stepwise"
                         ? stepwise_em_fit(structure, std::nullopt, docs.docs, fit.config, on_trace)
                         : em_fit(structure, std::nullopt, docs.docs, fit.config, on_trace);
  manifest.phase("fit", t0);
  HltmcModel fitted(structure, result.params, fit.config.sigma_floor);
  HltmcModel relabeled(structure, relabel_states(fitted), fit.config.sigma_floor);
  return {std::move(structure), std::move(relabeled), std::move(result), docs.dropped};
}

void report_training(const TrainedModel& t, std::ostream& out) {
  const std::size_t v = t.model.num_words();
  out << "documents dropped (length 0): " << t.dropped << '\n'
      << "per-document log-likelihood under the auxiliary model: " << std::setprecision(10) << t.fit.per_doc_loglik
      << '\n'
      << "best restart: " << t.fit.best_restart << '\n'
      << "parameters: " << count_parameters(t.model) << " (bound 6V = " << 6 * v << ")\n";
}

void report_heldout(const HeldoutReport& r, const EvalConfig& cfg, std::ostream& out) {
  out << "doc\tloglik\n";
  out << std::setprecision(10);
  for (std::size_t i = 0; i < r.per_doc.size(); ++i) out << r.ids[i] << '\t' << r.per_doc[i] << '\n';
  out << "estimator: " << (cfg.estimator == Estimator::importance ? "importance" : "naive") << ", K = " << cfg.samples
      << '\n'
      << "documents scored: " << r.per_doc.size() << ", skipped (length 0): " << r.skipped << '\n'
      << "per-document held-out log-likelihood: " << r.mean << " +/- " << r.std_error
      << " (+/- is the standard error of the mean)\n";
}

void write_heldout_lines(const HeldoutReport& r, const fs::path& path) {
  auto out = open_output(path);
  for (std::size_t i = 0; i < r.per_doc.size(); ++i) out << json{{"doc", r.ids[i]}, {"estimate", r.per_doc[i]}}.dump() << '\n';
}

struct EvalOptions {
  EvalConfig config;
  std::string estimator = "importance";
};

void add_eval_options(CLI::App* sub, EvalOptions& eval) {
  sub->add_option("-K,--K", eval.config.samples, "samples per document")->capture_default_str();
  sub->add_option("--estimator", eval.estimator, "importance or naive")
      ->check(CLI::IsMember({"importance", "naive"}))
      ->capture_default_str();
}

EvalConfig resolve(EvalOptions eval, std::uint64_t seed) {
  eval.config.seed = seed;
  eval.config.estimator = eval.estimator == "naive" ? Estimator::naive : Estimator::importance;
  eval.config.validate();
  return eval.config;
}

}  // namespace

std::uint64_t file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical latent tree models over word relative frequencies", "hltmc"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value file; command-line flags take precedence");
  app.set_version_flag("--version", std::string(kToolVersion));
  int workers = 0;
  std::optional<std::string> manifest_path;
  app.add_option("--workers", workers, "worker threads, 0 = all available; 1 is bit-reproducible")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app.add_option("--manifest", manifest_path, "run manifest path (default: next to the main output)");

  std::uint64_t seed = 1;
  std::string corpus_path, vocab_path, structure_path, out_path, model_path, tfidf_average = "all";
  std::optional<std::string> log_path, save_structure_path, embeddings_path, out_vocab_path, lengths_path,
      lengths_vocab_path, reference_path, reference_vocab_path, test_vocab_path;
  std::size_t vocab_size = 0, group_size = StructureOptions{}.group_size, max_words = kDefaultTopicWords;
  bool build = false;
  FitOptions fit;
  EvalOptions eval;
  std::string format = "text";
  std::size_t num_docs = 0;
  std::int64_t doc_length = 0;
  double train_fraction = 0.8;

  auto corpus_options = [&](CLI::App* sub) {
    sub->add_option("--corpus", corpus_path, "UCI docword file")->required()->check(CLI::ExistingFile);
    sub->add_option("--vocab", vocab_path, "vocabulary file, one word per line")->required()->check(CLI::ExistingFile);
  };
  auto vocab_selection = [&](CLI::App* sub) {
    sub->add_option("--vocab-size", vocab_size, "keep the top words by average tf-idf (0 = all)")->capture_default_str();
    sub->add_option("--tfidf-average", tfidf_average, "average tf-idf over all documents or containing ones")
        ->check(CLI::IsMember({"all", "containing"}))
        ->capture_default_str();
  };
  auto seed_option = [&](CLI::App* sub) { sub->add_option("--seed", seed, "random seed")->capture_default_str(); };
  auto group_option = [&](CLI::App* sub) {
    sub->add_option("--group-size", group_size, "maximum siblings per latent when building structure")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  };

  auto* train = app.add_subcommand("train", "fit parameters on a corpus");
  corpus_options(train);
  vocab_selection(train);
  seed_option(train);
  group_option(train);
  auto* structure_opt = train->add_option("--structure", structure_path, "structure file")->check(CLI::ExistingFile);
  train->add_flag("--build-structure", build, "build a structure from word co-occurrence")->excludes(structure_opt);
  add_fit_options(train, fit);
  train->add_option("--out", out_path, "output model file")->required();
  train->add_option("--log", log_path, "JSON-lines training log (default: <out>.log.jsonl)");
  train->add_option("--save-structure", save_structure_path, "also write the structure used");

  auto* evalc = app.add_subcommand("eval", "held-out log-likelihood of a test corpus");
  evalc->add_option("--model", model_path, "model file")->required()->check(CLI::ExistingFile);
  evalc->add_option("--test", corpus_path, "test docword file")->required()->check(CLI::ExistingFile);
  evalc->add_option("--vocab", test_vocab_path, "test vocabulary file (default: the model's words)")
      ->check(CLI::ExistingFile);
  add_eval_options(evalc, eval);
  seed_option(evalc);
  evalc->add_option("--out", out_path, "JSON-lines per-document estimates");

  auto* topicsc = app.add_subcommand("topics", "extract the topic hierarchy");
  topicsc->add_option("--model", model_path, "model file")->required()->check(CLI::ExistingFile);
  topicsc->add_option("-M,--words", max_words, "words per topic")->check(CLI::PositiveNumber)->capture_default_str();
  topicsc->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}))->capture_default_str();
  topicsc->add_option("--out", out_path, "output file (default: standard output)");

  auto* metricsc = app.add_subcommand("metrics", "topic coherence and compactness");
  metricsc->add_option("--model", model_path, "model file")->required()->check(CLI::ExistingFile);
  corpus_options(metricsc);
  metricsc->add_option("--embeddings", embeddings_path, "word vectors, text or binary")->check(CLI::ExistingFile);
  metricsc->add_option("-M,--words", max_words, "words per topic")->check(CLI::PositiveNumber)->capture_default_str();
  metricsc->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}))->capture_default_str();
  metricsc->add_option("--out", out_path, "output file (default: standard output)");

  auto* generate = app.add_subcommand("generate", "sample documents from a model");
  generate->add_option("--model", model_path, "model file")->required()->check(CLI::ExistingFile);
  auto* docs_opt = generate->add_option("--docs", num_docs, "number of documents");
  auto* length_opt = generate->add_option("--length", doc_length, "words per document")->check(CLI::NonNegativeNumber);
  auto* lengths_opt =
      generate->add_option("--lengths-from", lengths_path, "copy document lengths from this docword file")
          ->check(CLI::ExistingFile)
          ->excludes(docs_opt)
          ->excludes(length_opt);
  generate->add_option("--lengths-vocab", lengths_vocab_path, "vocabulary of --lengths-from")
      ->check(CLI::ExistingFile)
      ->needs(lengths_opt);
  seed_option(generate);
  generate->add_option("--out", out_path, "output docword file")->required();
  generate->add_option("--out-vocab", out_vocab_path, "output vocabulary file (default: <out>.vocab)");

  auto* structc = app.add_subcommand("structure", "build a structure from word co-occurrence");
  corpus_options(structc);
  vocab_selection(structc);
  group_option(structc);
  structc->add_option("--out", out_path, "output structure file")->required();

  auto* pipeline = app.add_subcommand("pipeline", "split, build structure, train, evaluate and extract topics");
  corpus_options(pipeline);
  vocab_selection(pipeline);
  seed_option(pipeline);
  group_option(pipeline);
  pipeline->add_option("--train-fraction", train_fraction, "share of documents used for training")
      ->capture_default_str();
  fit.mode = "batch";
  add_fit_options(pipeline, fit);
  add_eval_options(pipeline, eval);
  pipeline->add_option("-M,--words", max_words, "words per topic")->check(CLI::PositiveNumber)->capture_default_str();
  pipeline->add_option("--embeddings", embeddings_path, "word vectors for compactness")->check(CLI::ExistingFile);
  pipeline->add_option("--out-dir", out_path, "directory for every artifact")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (workers > 0) omp_set_num_threads(workers);
    CLI::App* sub = app.get_subcommands().front();
    Manifest manifest(sub->get_name());
    manifest.argv(args);
    manifest.config(*sub);
    manifest.set("workers_requested", workers);
    std::optional<fs::path> manifest_file = manifest_path ? std::optional<fs::path>(*manifest_path) : std::nullopt;
    auto default_manifest = [&](const fs::path& next_to) {
      if (!manifest_file) manifest_file = fs::path(next_to.string() + ".manifest.json");
    };
    auto select_vocab = [&](CountCorpus corpus) {
      if (vocab_size == 0 || vocab_size == corpus.vocab.size()) return corpus;
      return select_vocab_tfidf(corpus, vocab_size, parse_average(tfidf_average));
    };

    if (sub == train) {
      if (!build && structure_path.empty()) throw std::invalid_argument("train needs --structure or --build-structure");
      fit.config.seed = seed;
      manifest.seed("fit", seed);
      auto t0 = Clock::now();
      CountCorpus corpus = select_vocab(load_corpus(corpus_path, vocab_path, manifest));
      manifest.phase("load", t0);
      t0 = Clock::now();
      TreeStructure structure;
      if (build) {
        structure = build_structure(binarize(corpus), corpus.vocab, {group_size});
      } else {
        manifest.input(structure_path);
        structure = load_structure(structure_path, &corpus.vocab);
      }
      manifest.phase("structure", t0);
      const fs::path log_file = log_path ? fs::path(*log_path) : fs::path(out_path + ".log.jsonl");
      auto log = open_output(log_file);
      TrainedModel trained = train_model(corpus, std::move(structure), fit, log, manifest);
      save_model(trained.model, out_path);
      manifest.output(out_path);
      manifest.output(log_file);
      if (save_structure_path) {
        save_structure(trained.structure, *save_structure_path);
        manifest.output(*save_structure_path);
      }
      report_training(trained, out);
      default_manifest(out_path);
    } else if (sub == evalc) {
      const EvalConfig cfg = resolve(eval, seed);
      manifest.seed("eval", seed);
      manifest.input(model_path);
      const HltmcModel model = load_model(model_path);
      const Vocabulary model_vocab(model.structure().words);
      CountCorpus test;
      manifest.input(corpus_path);
      if (test_vocab_path) {
        manifest.input(*test_vocab_path);
        std::int64_t dropped = 0;
        test = reproject(load_uci_bow(corpus_path, *test_vocab_path), model_vocab, &dropped);
        if (dropped > 0) err << "note: " << dropped << " test tokens are outside the model vocabulary and were ignored\n";
      } else {
        test = load_uci_bow(corpus_path, model_vocab);
      }
      auto t0 = Clock::now();
      const HeldoutReport report = heldout_report(model, test, cfg);
      manifest.phase("eval", t0);
      report_heldout(report, cfg, out);
      if (!out_path.empty()) {
        write_heldout_lines(report, out_path);
        manifest.output(out_path);
        default_manifest(out_path);
      }
    } else if (sub == topicsc) {
      manifest.input(model_path);
      const HltmcModel model = load_model(model_path);
      const TopicTree tree = extract_hierarchy(model, max_words);
      const std::string text = format == "json" ? topic_tree_json(tree) + "\n" : format_topic_tree(tree);
      if (out_path.empty()) {
        out << text;
      } else {
        write_text(out_path, text);
        manifest.output(out_path);
        default_manifest(out_path);
      }
    } else if (sub == metricsc) {
      manifest.input(model_path);
      const HltmcModel model = load_model(model_path);
      const CountCorpus corpus =
          reproject(load_corpus(corpus_path, vocab_path, manifest), Vocabulary(model.structure().words));
      std::optional<Embeddings> embeddings;
      if (embeddings_path) {
        manifest.input(*embeddings_path);
        embeddings = load_embeddings(*embeddings_path);
      }
      const TopicTree tree = extract_hierarchy(model, max_words);
      const ScoreReport report = score_report(tree, corpus, embeddings ? &*embeddings : nullptr, max_words);
      const std::string text = format == "json" ? score_report_json(report) + "\n" : format_score_report(report);
      if (out_path.empty()) {
        out << text;
      } else {
        write_text(out_path, text);
        manifest.output(out_path);
        default_manifest(out_path);
      }
    } else if (sub == generate) {
      manifest.input(model_path);
      manifest.seed("generate", seed);
      const HltmcModel model = load_model(model_path);
      std::vector<std::int64_t> lengths;
      if (lengths_path) {
        if (!lengths_vocab_path) throw std::invalid_argument("--lengths-from needs --lengths-vocab");
        const CountCorpus reference = load_corpus(*lengths_path, *lengths_vocab_path, manifest);
        for (const auto& d : reference.docs) lengths.push_back(d.length());
      } else {
        if (docs_opt->count() == 0 || length_opt->count() == 0) {
          throw std::invalid_argument("generate needs --docs and --length, or --lengths-from");
        }
        lengths.assign(num_docs, doc_length);
      }
      auto t0 = Clock::now();
      const CountCorpus corpus = generate_corpus(model, lengths, seed);
      manifest.phase("generate", t0);
      const fs::path vocab_out = out_vocab_path ? fs::path(*out_vocab_path) : fs::path(out_path + ".vocab");
      save_uci_bow(corpus, out_path, vocab_out);
      manifest.output(out_path);
      manifest.output(vocab_out);
      out << "generated " << corpus.num_docs() << " documents\n";
      default_manifest(out_path);
    } else if (sub == structc) {
      const CountCorpus corpus = select_vocab(load_corpus(corpus_path, vocab_path, manifest));
      auto t0 = Clock::now();
      const TreeStructure s = build_structure(binarize(corpus), corpus.vocab, {group_size});
      manifest.phase("structure", t0);
      save_structure(s, out_path);
      manifest.output(out_path);
      std::size_t latents = 0;
      for (const auto& n : s.nodes) latents += n.kind == NodeKind::latent;
      out << "latent variables: " << latents << ", height: " << s.nodes[Topology(s).root()].level << '\n';
      default_manifest(out_path);
    } else if (sub == pipeline) {
      const fs::path dir = out_path;
      fs::create_directories(dir);
      fit.config.seed = seed;
      const EvalConfig cfg = resolve(eval, seed);
      manifest.seed("split", seed);
      manifest.seed("fit", seed);
      manifest.seed("eval", seed);
      auto t0 = Clock::now();
      const CountCorpus corpus = select_vocab(load_corpus(corpus_path, vocab_path, manifest));
      const CorpusSplit split = split_corpus(corpus, train_fraction, seed);
      save_uci_bow(split.train, dir / "train.docword.txt", dir / "vocab.txt");
      save_uci_bow(split.test, dir / "test.docword.txt", dir / "vocab.txt");
      manifest.phase("split", t0);
      t0 = Clock::now();
      TreeStructure structure = build_structure(binarize(split.train), corpus.vocab, {group_size});
      save_structure(structure, dir / "structure.txt");
      manifest.phase("structure", t0);
      auto log = open_output(dir / "train.log.jsonl");
      const TrainedModel trained = train_model(split.train, std::move(structure), fit, log, manifest);
      save_model(trained.model, dir / "model.json");
      report_training(trained, out);
      t0 = Clock::now();
      const HeldoutReport report = heldout_report(trained.model, split.test, cfg);
      manifest.phase("eval", t0);
      write_heldout_lines(report, dir / "eval.jsonl");
      {
        std::ostringstream table;
        report_heldout(report, cfg, table);
        write_text(dir / "eval.txt", table.str());
      }
      out << "per-document held-out log-likelihood: " << std::setprecision(10) << report.mean << " +/- "
          << report.std_error << " (standard error)\n";
      const TopicTree tree = extract_hierarchy(trained.model, max_words);
      write_text(dir / "topics.txt", format_topic_tree(tree));
      write_text(dir / "topics.json", topic_tree_json(tree) + "\n");
      std::optional<Embeddings> embeddings;
      if (embeddings_path) {
        manifest.input(*embeddings_path);
        embeddings = load_embeddings(*embeddings_path);
      }
      const ScoreReport scores = score_report(tree, split.train, embeddings ? &*embeddings : nullptr, max_words);
      write_text(dir / "metrics.json", score_report_json(scores) + "\n");
      for (const char* name : {"train.docword.txt", "test.docword.txt", "vocab.txt", "structure.txt", "train.log.jsonl",
                               "model.json", "eval.jsonl", "eval.txt", "topics.txt", "topics.json", "metrics.json"}) {
        manifest.output(dir / name);
      }
      out << format_topic_tree(tree);
      if (!manifest_file) manifest_file = dir / "manifest.json";
    }
    manifest.write(manifest_file, err);
    return 0;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace hltmc
