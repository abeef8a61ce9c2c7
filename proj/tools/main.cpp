#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "ctstage/error.hpp"

using namespace ctstage;
using namespace ctstage::cli;

namespace {

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Validation: return 2;
    case ErrorCategory::Persistence:
    case ErrorCategory::CorruptFile: return 3;
    case ErrorCategory::Numeric: return 4;
  }
  return 1;
}

struct ConfigFlags {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config, "JSON experiment config");
    app->add_option("--set", overrides, "Override a config field: field.path=value (repeatable)");
    app->add_option("--seed", seed, "Override the config seed");
    app->add_option("-o,--out", out, "Output directory")->required();
  }

  RunContext context() const {
    std::vector<std::string> all = overrides;
    if (seed) all.push_back("seed=" + std::to_string(*seed));
    const fs::path file(config);
    RunContext ctx;
    ctx.config = load_config(config.empty() ? nullptr : &file, all);
    ctx.config_json = to_json(ctx.config);
    ctx.out = out;
    return ctx;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-stage CT artifact reduction: data simulation, training, inference and evaluation"};
  app.require_subcommand(1);

  ConfigFlags phantom_flags;
  auto* phantom = app.add_subcommand("phantom", "Generate a foam phantom volume");
  phantom_flags.attach(phantom);

  ConfigFlags sim_flags;
  std::string sim_phantom;
  auto* simulate = app.add_subcommand("simulate", "Simulate HQ and degraded LQ scans of a phantom");
  sim_flags.attach(simulate);
  simulate->add_option("--phantom", sim_phantom, "Phantom manifest (generated from the config when omitted)");

  ConfigFlags train_flags;
  std::string mode = "multistage", input_role = "r_lq", resume_from = "p";
  std::vector<std::string> train_data;
  auto* train = app.add_subcommand("train", "Train the multi-stage model or the post-processing baseline");
  train_flags.attach(train);
  train->add_option("--mode", mode, "multistage or postprocess")->check(CLI::IsMember({"multistage", "postprocess"}));
  train->add_option("-d,--data", train_data, "Simulated dataset manifest (repeatable)")->required();
  train->add_option("--input-role", input_role, "Post-processing input role");
  train->add_option("--resume-from", resume_from, "First stage to train (p, s or r); earlier stages are loaded from --out")
      ->check(CLI::IsMember({"p", "s", "r"}));

  std::string infer_model, infer_data, infer_out;
  auto* infer = app.add_subcommand("infer", "Apply a trained model to a dataset");
  infer->add_option("-m,--model", infer_model, "Model directory")->required();
  infer->add_option("-d,--data", infer_data, "Dataset manifest")->required();
  infer->add_option("-o,--out", infer_out, "Output directory")->required();

  std::string eval_result, eval_ref, eval_role, eval_ref_role = "r_hq", eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "Per-slice PSNR, SSIM and MSE against a reference");
  evaluate->add_option("-r,--result", eval_result, "Result manifest")->required();
  evaluate->add_option("--reference", eval_ref, "Reference manifest")->required();
  evaluate->add_option("--role", eval_role, "Result role (default: the result's final output)");
  evaluate->add_option("--reference-role", eval_ref_role, "Reference role");
  evaluate->add_option("-o,--out", eval_out, "Output directory")->required();

  ConfigFlags grid_flags;
  std::string grid_file, grid_data, grid_domain = "projection";
  bool grid_apply = false;
  auto* gridsearch = app.add_subcommand("gridsearch", "Exhaustive search over classical-chain parameters");
  grid_flags.attach(gridsearch);
  gridsearch->add_option("-g,--grid", grid_file, "Grid JSON")->required();
  gridsearch->add_option("-d,--data", grid_data, "Simulated dataset manifest")->required();
  gridsearch->add_option("--domain", grid_domain, "projection or reconstruction");
  gridsearch->add_flag("--apply", grid_apply, "Also write the best chain's reconstruction (role r_classical)");

  std::string bench_model, bench_data, bench_out;
  auto* bench = app.add_subcommand("bench", "Per-stage inference timing");
  bench->add_option("-m,--model", bench_model, "Model directory")->required();
  bench->add_option("-d,--data", bench_data, "Dataset manifest")->required();
  bench->add_option("-o,--out", bench_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*phantom) {
      cmd_phantom(phantom_flags.context());
    } else if (*simulate) {
      std::optional<fs::path> p;
      if (!sim_phantom.empty()) p = sim_phantom;
      cmd_simulate(sim_flags.context(), p);
    } else if (*train) {
      std::vector<fs::path> data(train_data.begin(), train_data.end());
      cmd_train(train_flags.context(), mode, data, input_role, resume_from);
    } else if (*infer) {
      cmd_infer(infer_model, infer_data, infer_out);
    } else if (*evaluate) {
      cmd_evaluate(eval_result, eval_ref, eval_role, eval_ref_role, eval_out);
    } else if (*gridsearch) {
      cmd_gridsearch(grid_flags.context(), grid_file, grid_data, grid_domain, grid_apply);
    } else if (*bench) {
      cmd_bench(bench_model, bench_data, bench_out);
    }
  } catch (const Error& e) {
    std::cerr << "error[" << category_name(e.category()) << "]: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error[io]: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
