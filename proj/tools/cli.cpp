#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <iostream>

#include "shrimpmorph/errors.hpp"
#include "shrimpmorph/http_api.hpp"
#include "shrimpmorph/service.hpp"
#include "shrimpmorph/workflows.hpp"

namespace fs = std::filesystem;
using namespace shrimpmorph;

namespace {

struct Options {
  std::uint64_t seed = 0;
  std::string config;
  std::string store = "store.log";
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string corpus;
  std::string models;
  std::string out;
  std::size_t n = 300;
  double cm_per_px = SynthParams{}.scale_cm_per_px;
};

KvConfig load_config(const Options& o) {
  if (o.config.empty()) return {};
  if (!fs::exists(o.config)) throw IoError("config file not found: " + o.config);
  return load_kv_config(o.config);
}

std::vector<SampleRecord> load_corpus_checked(const std::string& dir) {
  if (!fs::exists(dir)) throw IoError("corpus directory not found: " + dir);
  return load_corpus(dir);
}

int cmd_synth(const Options& o) {
  const auto params = synth_params_from_config(load_config(o), o.seed);
  const auto corpus = generate_corpus(params, o.n);
  save_corpus(corpus, o.out);
  std::cout << "wrote " << corpus.size() << " samples to " << o.out << "\n";
  return 0;
}

int cmd_train_disc(const Options& o) {
  const auto corpus = load_corpus_checked(o.corpus);
  const auto d = train_discriminators(corpus, classifier_hyper_from_config(load_config(o), o.seed));
  fs::create_directories(o.models);
  save_classifier(d.view, fs::path(o.models) / kViewModelFile);
  save_classifier(d.rostrum, fs::path(o.models) / kRostrumModelFile);
  std::cout << "saved view and rostrum classifiers to " << o.models << "\n";
  return 0;
}

int cmd_train_pose(const Options& o) {
  tune_allocator_for_training();
  const auto config = load_config(o);
  const auto corpus = load_corpus_checked(o.corpus);
  PoseTrainHyper hyper = pose_hyper_from_config(config, o.seed);
  hyper.on_epoch = [](int epoch, double loss) {
    std::fprintf(stderr, "epoch %d loss %.6g\n", epoch, loss);
  };
  const auto registry = train_pose_models(corpus, pose_config_from_config(config, o.seed), hyper,
                                          static_cast<std::size_t>(config.get_int("pose.min_samples", 1)));
  fs::create_directories(o.models);
  for (const auto& [variant, model] : registry.models()) {
    save_pose_model(model, fs::path(o.models) / pose_model_file(variant));
    std::cout << "saved " << pose_model_file(variant) << "\n";
  }
  return 0;
}

int cmd_fit_regression(const Options& o) {
  const auto corpus = load_corpus_checked(o.corpus);
  const auto models = fit_regression_from_corpus(corpus, svr_hyper_from_config(load_config(o)));
  fs::create_directories(o.models);
  save_regression_set(models, fs::path(o.models) / kRegressionFile);
  std::cout << "saved " << models.size() << " regressions to "
            << (fs::path(o.models) / kRegressionFile).string() << "\n";
  return 0;
}

int cmd_eval(const Options& o) {
  const auto corpus = load_corpus_checked(o.corpus);
  const auto models = load_models(o.models);
  const ScaleFactor scale{load_config(o).get_double("eval.cm_per_px", o.cm_per_px), "configured"};
  scale.validate();
  const Report report = report_tables(evaluate_corpus(corpus, models, scale));
  fs::create_directories(o.out);
  write_text_file(fs::path(o.out) / "report.txt", report.text);
  write_text_file(fs::path(o.out) / "report.csv", report.csv);
  std::cout << report.text;
  return 0;
}

int cmd_pipeline(const Options& o) {
  auto models = load_models(o.models);
  PipelineService service(load_corpus_checked(o.corpus), std::move(models), o.store);
  for (const auto& w : service.warnings()) std::cerr << "warning: " << w << "\n";
  const auto n = service.process_pending();
  const auto summary = service.metrics_summary();
  std::cout << "processed " << n << " samples; " << summary["status"].dump() << "; open alerts "
            << summary["alerts"]["open"] << "\n";
  return 0;
}

HttpApi* g_api = nullptr;

int cmd_serve(const Options& o) {
  auto models = load_models(o.models);
  PipelineService service(load_corpus_checked(o.corpus), std::move(models), o.store);
  for (const auto& w : service.warnings()) std::cerr << "warning: " << w << "\n";
  service.process_pending();
  HttpApi api(service);
  const int port = api.bind(o.host, o.port);
  std::cout << "listening on http://" << o.host << ":" << port << std::endl;
  g_api = &api;
  std::signal(SIGINT, [](int) { if (g_api) g_api->stop(); });
  std::signal(SIGTERM, [](int) { if (g_api) g_api->stop(); });
  api.listen();
  g_api = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shrimpmorph: shrimp morphometrics from RGB-D images"};
  app.require_subcommand(1);
  Options o;
  auto common = [&o](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--config", o.config, "key=value configuration file");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  common(synth);
  synth->add_option("--out", o.out, "corpus directory")->required();
  synth->add_option("--n", o.n, "number of samples");

  auto* disc = app.add_subcommand("train-disc", "train view and rostrum classifiers");
  common(disc);
  disc->add_option("--corpus", o.corpus)->required();
  disc->add_option("--models", o.models, "model directory")->required();

  auto* pose = app.add_subcommand("train-pose", "train one pose network per variant");
  common(pose);
  pose->add_option("--corpus", o.corpus)->required();
  pose->add_option("--models", o.models)->required();

  auto* reg = app.add_subcommand("fit-regression", "fit per-variable SVR conversions");
  common(reg);
  reg->add_option("--corpus", o.corpus)->required();
  reg->add_option("--models", o.models)->required();

  auto* eval = app.add_subcommand("eval", "write evaluation tables");
  common(eval);
  eval->add_option("--corpus", o.corpus)->required();
  eval->add_option("--models", o.models)->required();
  eval->add_option("--out", o.out, "report directory")->required();
  eval->add_option("--cm-per-px", o.cm_per_px, "baseline scale factor");

  auto* pipe = app.add_subcommand("pipeline", "run the pipeline over a corpus");
  common(pipe);
  pipe->add_option("--corpus", o.corpus)->required();
  pipe->add_option("--models", o.models)->required();
  pipe->add_option("--store", o.store, "event log path");

  auto* serve = app.add_subcommand("serve", "serve the review HTTP API");
  common(serve);
  serve->add_option("--corpus", o.corpus)->required();
  serve->add_option("--models", o.models)->required();
  serve->add_option("--store", o.store, "event log path");
  serve->add_option("--port", o.port, "TCP port (0 = any)");
  serve->add_option("--host", o.host, "bind address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "shrimpmorph: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*disc) return cmd_train_disc(o);
    if (*pose) return cmd_train_pose(o);
    if (*reg) return cmd_fit_regression(o);
    if (*eval) return cmd_eval(o);
    if (*pipe) return cmd_pipeline(o);
    if (*serve) return cmd_serve(o);
  } catch (const std::exception& e) {
    std::cerr << "shrimpmorph: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
