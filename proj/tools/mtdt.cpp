// Copyright 2026 The MTDT Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// mtdt: dataset generation, training, evaluation, prediction and the HTTP
// service.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "mtdt/checkpoint.hpp"
#include "mtdt/error.hpp"
#include "mtdt/metrics.hpp"
#include "mtdt/service.hpp"
#include "mtdt/sim/dataset.hpp"
#include "mtdt/sim/record.hpp"
#include "mtdt/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kUsageExit = 2;

// Bad input discovered after parsing (unreadable JSON, missing keys) is
// still the caller's fault.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const json& j) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw mtdt::ConfigError("cannot write " + path);
  out << j.dump(2) << '\n';
}

std::vector<mtdt::sim::SimulationRecord> load_records(const std::string& path) {
  try {
    return mtdt::sim::load_jsonl(path);
  } catch (const json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("mtdt");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("MTDT_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept it when asked for.
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
    else spdlog::warn("MTDT_LOG={} is not a level name; keeping info", env);
  }
}

int run_generate(const std::string& topology_file, std::size_t n, std::uint64_t seed, const std::string& out) {
  mtdt::sim::DatasetConfig config = mtdt::sim::default_dataset_config();
  if (!topology_file.empty()) config.topologies = mtdt::sim::load_topologies(topology_file);
  spdlog::info("generating {} records over {} topologies (seed {})", n, config.topologies.size(), seed);
  const auto records = mtdt::sim::generate_dataset(config, n, seed);
  if (const auto parent = fs::path(out).parent_path(); !parent.empty()) fs::create_directories(parent);
  mtdt::sim::save_jsonl(out, records);
  spdlog::info("wrote {}", out);
  return 0;
}

int run_train(const std::string& data, const std::string& config_file, const std::string& out_dir) {
  mtdt::train::TrainConfig config;
  if (!config_file.empty()) {
    try {
      config = read_json(config_file).get<mtdt::train::TrainConfig>();
    } catch (const json::exception& e) {
      throw UsageError(config_file + ": " + e.what());
    }
  }
  mtdt::train::validate(config);
  const auto records = load_records(data);
  const auto topologies = mtdt::sim::standard_topology_set();
  spdlog::info("training {} on {} records, {} epochs, grid of {}", mtdt::model::to_string(config.model.variant),
               records.size(), config.epochs, config.weight_decay_grid.size());
  const auto result = mtdt::train::train(records, topologies, config);
  fs::create_directories(out_dir);
  const auto ckpt = mtdt::train::to_checkpoint(result, config, topologies);
  mtdt::model::save_checkpoint((fs::path(out_dir) / "model.ckpt").string(), ckpt);
  write_json((fs::path(out_dir) / "train_report.json").string(), result.report);
  spdlog::info("selected weight decay {} at epoch {} (val {:.6g}); checkpoint {}", result.report.selected_weight_decay,
               result.report.best_epoch, result.report.best_val, result.report.checkpoint_id);
  return 0;
}

int run_eval(const std::string& data, const std::string& ckpt_file, const std::string& out,
             const std::string& csv) {
  const auto ckpt = mtdt::model::load_checkpoint(ckpt_file);
  const auto records = load_records(data);
  const auto report = mtdt::metrics::evaluate(ckpt, records);
  write_json(out, report);
  if (!csv.empty()) {
    std::ofstream c(csv);
    if (!c) throw mtdt::ConfigError("cannot write " + csv);
    mtdt::metrics::write_csv(c, report);
  }
  spdlog::info("evaluated {} records; ql MAE {:.4g}", report.records,
               report.overall.ql ? report.overall.ql->mae : 0.0);
  return 0;
}

int run_predict(const std::string& ckpt_file, const std::string& request, const std::string& out,
                const std::string& mode) {
  std::optional<mtdt::model::Checkpoint> ckpt;
  if (!ckpt_file.empty()) ckpt = mtdt::model::load_checkpoint(ckpt_file);
  if (mode == "predict" && !ckpt) throw UsageError("--ckpt is required in predict mode");
  const mtdt::service::Service service(mtdt::sim::standard_topology_set(), std::move(ckpt));
  const json body = read_json(request);
  const auto r = service.handle("POST", mode == "predict" ? "/v1/predict" : "/v1/simulate", body.dump());
  if (r.status != 200) {
    std::cerr << "mtdt predict: " << r.body.dump(2) << '\n';
    return r.status == 400 ? kUsageExit : 1;
  }
  write_json(out, r.body);
  return 0;
}

int run_serve(const std::string& ckpt_file, const std::string& addr) {
  const auto colon = addr.rfind(':');
  int port = 0;
  try {
    if (colon == std::string::npos) throw std::invalid_argument(addr);
    port = std::stoi(addr.substr(colon + 1));
  } catch (const std::exception&) {
    throw UsageError("--addr must be HOST:PORT, got " + addr);
  }
  const std::string host = addr.substr(0, colon);

  std::optional<mtdt::model::Checkpoint> ckpt;
  if (!ckpt_file.empty()) ckpt = mtdt::model::load_checkpoint(ckpt_file);
  const mtdt::service::Service service(mtdt::sim::standard_topology_set(), std::move(ckpt));

  httplib::Server server;
  auto route = [&service](const httplib::Request& req, httplib::Response& res) {
    const auto r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
    spdlog::debug("{} {} -> {}", req.method, req.path, r.status);
  };
  server.Get(R"(/.*)", route);
  server.Post(R"(/.*)", route);
  server.Put(R"(/.*)", route);
  server.Delete(R"(/.*)", route);

  spdlog::info("serving on {}:{} ({})", host, port,
               service.has_checkpoint() ? "checkpoint loaded" : "no checkpoint; /v1/predict answers 409");
  if (!server.listen(host, port)) throw mtdt::ConfigError("cannot listen on " + addr);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"Multi-task digital twin of a signalized intersection"};
  app.require_subcommand(1);

  std::string topology_file, out, data, config_file, ckpt_file, request, csv, mode = "predict", addr = "127.0.0.1:8080";
  std::size_t n = 0;
  std::uint64_t seed = 0;

  auto* gen = app.add_subcommand("generate", "Simulate a JSONL dataset");
  gen->add_option("--topology", topology_file, "Topology JSON (default: the standard set)")->check(CLI::ExistingFile);
  gen->add_option("--n", n, "Number of records")->required();
  gen->add_option("--seed", seed, "Master seed")->required();
  gen->add_option("--out", out, "Output JSONL")->required();

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--data", data, "Training JSONL")->required()->check(CLI::ExistingFile);
  tr->add_option("--config", config_file, "Train config JSON")->check(CLI::ExistingFile);
  tr->add_option("--out", out, "Output directory")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--data", data, "Evaluation JSONL")->required()->check(CLI::ExistingFile);
  ev->add_option("--ckpt", ckpt_file, "Checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", out, "Report JSON")->required();
  ev->add_option("--csv", csv, "Also write the report tables as CSV");

  auto* pr = app.add_subcommand("predict", "Answer one request");
  pr->add_option("--ckpt", ckpt_file, "Checkpoint")->check(CLI::ExistingFile);
  pr->add_option("--request", request, "Request JSON")->required()->check(CLI::ExistingFile);
  pr->add_option("--out", out, "Response JSON")->required();
  pr->add_option("--mode", mode, "predict (model) or simulate (ground truth)")
      ->check(CLI::IsMember({"predict", "simulate"}));

  auto* sv = app.add_subcommand("serve", "Run the HTTP service");
  sv->add_option("--ckpt", ckpt_file, "Checkpoint")->check(CLI::ExistingFile);
  sv->add_option("--addr", addr, "HOST:PORT");

  auto* topo = app.add_subcommand("topologies", "Write the standard topology set");
  topo->add_option("--out", out, "Output JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageExit;
  }

  try {
    if (*gen) return run_generate(topology_file, n, seed, out);
    if (*tr) return run_train(data, config_file, out);
    if (*ev) return run_eval(data, ckpt_file, out, csv);
    if (*pr) return run_predict(ckpt_file, request, out, mode);
    if (*sv) return run_serve(ckpt_file, addr);
    if (*topo) {
      mtdt::sim::save_topologies(out, mtdt::sim::standard_topology_set());
      return 0;
    }
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kUsageExit;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}
