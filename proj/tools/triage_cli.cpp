// Command-line entry point: data generation, training, evaluation,
// simulation and the HTTP service.

#include <csignal>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "triage/cc/cc_classifier.hpp"
#include "triage/datagen/world.hpp"
#include "triage/error.hpp"
#include "triage/neural/grad_check.hpp"
#include "triage/neural/loss_weight_search.hpp"
#include "triage/service/bundle.hpp"
#include "triage/service/experiments.hpp"
#include "triage/service/http_server.hpp"
#include "triage/stats/lift.hpp"
#include "triage/stats/metrics.hpp"
#include "triage/util/log.hpp"

namespace fs = std::filesystem;
using namespace triage;

namespace {

struct DataDir {
  datagen::WorldModel world;
  std::vector<Encounter> train;
  std::vector<Encounter> test;
};

DataDir read_data(const fs::path& dir) {
  DataDir d;
  d.world = datagen::WorldModel::from_json(util::read_json_file(dir / "world.json"));
  d.train = read_encounters(dir / "train.jsonl");
  if (fs::exists(dir / "test.jsonl")) d.test = read_encounters(dir / "test.jsonl");
  return d;
}

// The bundle in `models` if it exists, else an empty one seeded with the
// data directory's catalog and knowledge base.
service::ModelBundle open_bundle(const fs::path& models, const fs::path& data) {
  if (fs::exists(models / "manifest.json")) return service::load_models(models);
  service::ModelBundle b;
  b.catalog = cms::ConceptCatalog::load(data / "catalog.json");
  b.kb = qseq::KnowledgeBase::load(data / "kb.json", b.catalog);
  return b;
}

std::vector<std::string> cc_ids(const datagen::WorldModel& w) {
  std::vector<std::string> out;
  for (const auto& c : w.chief_complaints) out.push_back(c.id);
  return out;
}

void print(const util::Json& j) { std::cout << j.dump(2) << std::endl; }

service::HttpServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive triage engine: data generation, training and serving"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic world and dataset");
  std::uint64_t gen_seed = 1;
  std::size_t n_train = 20000, n_test = 5000;
  int lookback = 365;
  std::string gen_out = "data/world", world_config;
  gen->add_option("--seed", gen_seed, "World seed");
  gen->add_option("--n-train", n_train, "Training encounters");
  gen->add_option("--n-test", n_test, "Test encounters");
  gen->add_option("--lookback-days", lookback, "History lookback window");
  gen->add_option("--world-config", world_config, "World config JSON");
  gen->add_option("--out", gen_out, "Output directory");

  // shared options
  std::string data_dir = "data/world", models_dir = "models";
  auto add_io = [&](CLI::App* c) {
    c->add_option("--data", data_dir, "Data directory from gen-data");
    c->add_option("--models", models_dir, "Model bundle directory");
  };

  auto* tf = app.add_subcommand("train-forests", "Train one random forest per cohort");
  add_io(tf);
  forest::ForestParams fparams;
  forest::PrepareOptions prep;
  bool tf_no_history = false;
  tf->add_option("--trees", fparams.n_trees, "Trees per forest");
  tf->add_option("--feature-fraction", fparams.feature_fraction, "Features sampled per node");
  tf->add_option("--max-depth", fparams.max_depth, "Maximum tree depth");
  tf->add_option("--threads", fparams.threads, "Training threads");
  tf->add_option("--seed", fparams.seed, "Forest seed");
  tf->add_option("--min-count", prep.min_count, "Minimum cohort size and joint count");
  tf->add_flag("--no-history", tf_no_history, "Drop history features");

  auto* tc = app.add_subcommand("train-cc", "Train the chief-complaint classifier");
  add_io(tc);
  cc::CcConfig ccc;
  std::string embeddings;
  bool tc_no_history = false;
  tc->add_option("--epochs", ccc.epochs, "Training epochs");
  tc->add_option("--hidden", ccc.hidden, "Hidden width");
  tc->add_option("--seed", ccc.seed, "Seed");
  tc->add_option("--history-min-count", ccc.history_min_count, "History item frequency floor");
  tc->add_option("--embeddings", embeddings, "Precomputed text vectors (JSONL)");
  tc->add_flag("--crop50", ccc.text.crop50, "Crop input text to 50 characters");
  tc->add_flag("--no-history", tc_no_history, "Drop the history input");

  neural::AssessmentConfig acfg;
  auto add_assess = [&](CLI::App* c) {
    c->add_option("--epochs", acfg.epochs, "Training epochs");
    c->add_option("--width", acfg.width, "Trunk width");
    c->add_option("--seed", acfg.seed, "Seed");
    c->add_option("--target-min-count", acfg.target_min_count, "Minimum joint count of a target");
    c->add_option("--history-min-count", acfg.history_min_count, "History item frequency floor");
  };
  auto* lws = app.add_subcommand("loss-weight-search", "Random search over head loss weights");
  add_io(lws);
  add_assess(lws);
  int trials = 10;
  double sample_frac = 0.05;
  std::string lws_out = "loss_weights.json";
  lws->add_option("--trials", trials, "Number of weight tuples");
  lws->add_option("--sample-frac", sample_frac, "Training subsample fraction");
  lws->add_option("--out", lws_out, "Report path");

  auto* ta = app.add_subcommand("train-assess", "Train the assessment model");
  add_io(ta);
  add_assess(ta);
  std::vector<double> weights;
  std::string weights_from;
  bool ta_no_history = false;
  ta->add_option("--weights", weights, "Loss weights: diagnoses medications labs imaging")
      ->expected(4);
  ta->add_option("--weights-from", weights_from, "Use the tuple chosen in a search report");
  ta->add_flag("--no-history", ta_no_history, "Drop the history input");

  auto* ev = app.add_subcommand("eval", "Evaluate the bundle on the test split");
  add_io(ev);

  auto* sim = app.add_subcommand("simulate", "Batch simulated-patient sessions");
  add_io(sim);
  int n_sessions = 100;
  std::string sim_log;
  std::string experiment;
  int n_worlds = 20;
  sim->add_option("--sessions", n_sessions, "Sessions to run");
  sim->add_option("--log-dir", sim_log, "Event log directory");
  sim->add_option("--experiment", experiment, "policy | history-ablation | depth")
      ->check(CLI::IsMember({"policy", "history-ablation", "depth"}));
  sim->add_option("--worlds", n_worlds, "Worlds or seeds for experiments");

  auto* srv = app.add_subcommand("serve", "Run the HTTP session service");
  std::string config_file;
  srv->add_option("--config", config_file, "Service config JSON");

  auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient checks");
  std::uint64_t gc_seed = 7;
  gc->add_option("--seed", gc_seed, "Seed");

  CLI11_PARSE(app, argc, argv);
  util::set_log_level(verbose ? util::LogLevel::kInfo : util::LogLevel::kWarn);

  try {
    if (*gen) {
      datagen::WorldConfig wc;
      if (!world_config.empty()) wc = datagen::WorldConfig::from_json(util::read_json_file(world_config));
      const auto world = datagen::build_world(gen_seed, wc);
      fs::create_directories(gen_out);
      util::write_json_file(fs::path(gen_out) / "world.json", world.to_json());
      world.catalog.save(fs::path(gen_out) / "catalog.json");
      util::write_json_file(fs::path(gen_out) / "kb.json", datagen::generate_kb(world));
      write_encounters(fs::path(gen_out) / "train.jsonl", datagen::sample_dataset(world, n_train, lookback, 0));
      write_encounters(fs::path(gen_out) / "test.jsonl", datagen::sample_dataset(world, n_test, lookback, 1));
      print({{"out", gen_out}, {"train", n_train}, {"test", n_test}});
    } else if (*tf) {
      const auto d = read_data(data_dir);
      auto bundle = open_bundle(models_dir, data_dir);
      prep.use_history = !tf_no_history;
      const auto lift = stats::bayesian_lift(d.train, OutcomeKind::kDiagnosis);
      bundle.forests.clear();
      bundle.rules_only.clear();
      int skipped = 0;
      for (const auto& key : forest::cohorts_in(d.train)) {
        auto data = forest::prepare_cohort_data(d.train, key, lift, bundle.catalog, prep);
        if (!data) {
          ++skipped;
          continue;
        }
        forest::ForestParams p = fparams;
        p.seed = fparams.seed * 1000003ULL + bundle.forests.size();
        try {
          bundle.forests.emplace(key, forest::train_forest(*data, p, prep.history_days));
          util::log_info("trained forest " + key.file_stem());
        } catch (const ValidationError& e) {
          ++skipped;
        }
      }
      service::persist_models(bundle, models_dir);
      print({{"forests", bundle.forests.size()}, {"rules_only_cohorts", skipped}});
    } else if (*tc) {
      const auto d = read_data(data_dir);
      auto bundle = open_bundle(models_dir, data_dir);
      ccc.use_history = !tc_no_history;
      std::optional<cc::ExternalEmbeddings> ext;
      if (!embeddings.empty()) ext = cc::ExternalEmbeddings::load(embeddings);
      bundle.cc_model = cc::train_cc_model(d.train, cc_ids(d.world), ccc, ext ? &*ext : nullptr);
      service::persist_models(bundle, models_dir);
      util::Json out = {{"chief_complaints", d.world.chief_complaints.size()}};
      if (!d.test.empty()) out["test_micro_pr_auc"] = cc::cc_micro_pr_auc(*bundle.cc_model, d.test, ext ? &*ext : nullptr);
      print(out);
    } else if (*lws) {
      const auto d = read_data(data_dir);
      const auto schema = neural::build_assessment_schema(d.train, d.world.catalog, acfg);
      const auto train = neural::make_examples(schema, d.train, acfg);
      const auto eval = neural::make_examples(schema, d.test, acfg);
      const auto report = neural::loss_weight_search(schema, train, eval, acfg,
                                                     neural::default_weight_candidates(), trials,
                                                     sample_frac, acfg.seed);
      util::write_json_file(lws_out, report.to_json());
      print(report.to_json());
    } else if (*ta) {
      const auto d = read_data(data_dir);
      auto bundle = open_bundle(models_dir, data_dir);
      acfg.use_history = !ta_no_history;
      if (!weights.empty()) {
        for (int h = 0; h < neural::kNumHeads; ++h) acfg.loss_weights[h] = weights[h];
      } else if (!weights_from.empty()) {
        const auto rep = util::read_json_file(weights_from);
        const auto w = rep.at("chosen_weights").get<std::vector<double>>();
        for (int h = 0; h < neural::kNumHeads; ++h) acfg.loss_weights[h] = w.at(h);
      }
      const auto schema = neural::build_assessment_schema(d.train, d.world.catalog, acfg);
      const auto train = neural::make_examples(schema, d.train, acfg);
      bundle.assessment = neural::train_assessment(schema, train, acfg);
      service::persist_models(bundle, models_dir);
      util::Json out = {{"loss_weights", acfg.loss_weights}};
      if (!d.test.empty()) {
        out["test_pr_auc"] = neural::head_pr_auc(*bundle.assessment,
                                                 neural::make_examples(schema, d.test, acfg));
      }
      print(out);
    } else if (*ev) {
      const auto d = read_data(data_dir);
      const auto bundle = service::load_models(models_dir);
      util::Json out = util::Json::object();
      if (!bundle.forests.empty()) out["qs_micro_roc_auc"] = service::forest_micro_roc_auc(bundle.forests, d.test);
      if (bundle.cc_model) out["cc_micro_pr_auc"] = cc::cc_micro_pr_auc(*bundle.cc_model, d.test);
      if (bundle.assessment) {
        const auto& m = *bundle.assessment;
        const auto test = neural::make_examples(m.schema(), d.test, m.config());
        util::Json heads = util::Json::object();
        const char* names[] = {"diagnoses", "medications", "labs", "imaging"};
        for (int h = 0; h < neural::kNumHeads; ++h) {
          stats::ScoreMatrix s;
          stats::TruthMatrix t;
          for (const auto& x : test) {
            s.push_back(m.predict(x)[h]);
            std::vector<char> row(m.schema().targets[h].size(), 0);
            for (int k : x.labels[h]) row[k] = 1;
            t.push_back(row);
          }
          try {
            const auto r = stats::rank_metrics(s, t);
            heads[names[h]] = {{"micro_pr_auc", r.micro_pr_auc},
                               {"micro_roc_auc", r.micro_roc_auc},
                               {"ndcg", r.ndcg}};
          } catch (const UndefinedMetricError& e) {
            heads[names[h]] = {{"error", e.what()}};
          }
        }
        out["assessment"] = heads;
      }
      print(out);
    } else if (*sim) {
      if (experiment == "policy") {
        service::PolicyConfig pc;
        pc.n_worlds = n_worlds;
        print(service::compare_policies(pc).to_json());
      } else if (experiment == "history-ablation") {
        auto ac = service::history_ablation_config();
        ac.n_seeds = n_worlds;
        print(service::history_ablation(ac).to_json());
      } else if (experiment == "depth") {
        auto ac = service::history_ablation_config();
        print(service::depth_vs_logistic(1, ac.fixture, ac.assessment).to_json());
      } else {
        const auto d = read_data(data_dir);
        const auto bundle = service::load_models(models_dir);
        service::PatientStore patients;
        patients.add_encounters(d.test);
        service::ServiceConfig sc;
        sc.log_dir = sim_log;
        service::SessionManager manager(bundle, patients, sc);
        int done = 0, with_assessment = 0;
        std::size_t questions = 0;
        for (const auto& e : d.test) {
          if (done >= n_sessions) break;
          const auto t = service::simulate_session(manager, bundle.catalog, e);
          ++done;
          questions += t.questions.size();
          if (!t.assessment.is_null()) ++with_assessment;
        }
        print({{"sessions", done},
               {"mean_questions", done ? static_cast<double>(questions) / done : 0.0},
               {"with_assessment", with_assessment}});
      }
    } else if (*srv) {
      const auto cfg = service::ServiceConfig::load(
          config_file.empty() ? std::nullopt : std::optional<fs::path>(config_file));
      const auto bundle = service::load_models(cfg.model_dir);
      service::PatientStore patients;
      if (!cfg.patients_path.empty()) patients = service::PatientStore::load(cfg.patients_path);
      service::SessionManager manager(bundle, patients, cfg);
      service::HttpServer server(manager);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << cfg.host << ":" << cfg.port << std::endl;
      if (!server.listen(cfg.host, cfg.port)) {
        std::cerr << "cannot bind " << cfg.host << ":" << cfg.port << std::endl;
        return 1;
      }
    } else if (*gc) {
      auto targets = neural::standard_grad_check_targets(gc_seed);
      targets.push_back(cc::cc_grad_check_target(gc_seed));
      util::Json out = util::Json::object();
      bool ok = true;
      for (const auto& t : targets) {
        const double err = neural::gradient_check(t);
        out[t.name] = err;
        ok = ok && err < 1e-4;
      }
      print(out);
      return ok ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
