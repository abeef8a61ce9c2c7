#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "ctstage/classical.hpp"
#include "ctstage/error.hpp"
#include "ctstage/geometry.hpp"
#include "ctstage/io.hpp"
#include "ctstage/manifest.hpp"
#include "ctstage/metrics.hpp"

namespace ctstage::cli {

using nlohmann::json;

namespace {

constexpr int kModelInfoVersion = 1;

void write_json(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw PersistenceError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw PersistenceError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw PersistenceError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw CorruptFileError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::ofstream open_text(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw PersistenceError("cannot write " + path.string());
  return out;
}

ManifestEntry entry(const std::string& role, Quality q, const Shape3& shape) {
  return {role, q, role + ".raw", shape};
}

void add_projections(DatasetManifest& m, const fs::path& dir, const std::string& role, Quality q,
                     const ProjectionStack& p) {
  save_projections(p, dir / (role + ".raw"));
  m.add(entry(role, q, p.data.shape()));
}

void add_sinograms(DatasetManifest& m, const fs::path& dir, const std::string& role, Quality q,
                   const SinogramStack& s) {
  save_sinograms(s, dir / (role + ".raw"));
  m.add(entry(role, q, s.data.shape()));
}

void add_volume(DatasetManifest& m, const fs::path& dir, const std::string& role, Quality q, const Volume& v) {
  save_volume(v, dir / (role + ".raw"));
  m.add(entry(role, q, v.data.shape()));
}

json provenance(const std::string& command, const json& extra) {
  json p = {{"command", command}};
  p.update(extra);
  return p;
}

json params_json(const ClassicalParams& p) {
  return {{"dif", p.dif},
          {"size", p.size},
          {"level", p.level},
          {"wavelet", to_string(p.wavelet)},
          {"sigma", p.sigma}};
}

template <typename T>
std::vector<T> grid_axis(const json& g, const char* key, const std::vector<T>& fallback) {
  if (!g.contains(key)) return fallback;
  const json& a = g.at(key);
  if (!a.is_array() || a.empty()) throw ValidationError(std::string("grid field '") + key + "' must be a non-empty array");
  try {
    return a.get<std::vector<T>>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("grid field '") + key + "' has a value of the wrong type");
  }
}

bool is_multistage_dir(const fs::path& dir) { return fs::exists(dir / "multistage.json"); }

struct PostprocessInfo {
  RegressorModel model;
  std::string input_role;
};

PostprocessInfo load_postprocess(const fs::path& dir) {
  if (!fs::exists(dir / "postprocess.json"))
    throw PersistenceError("model directory " + dir.string() + " holds neither multistage.json nor postprocess.json");
  const json info = read_json(dir / "postprocess.json");
  PostprocessInfo p;
  try {
    if (info.at("version").get<int>() != kModelInfoVersion)
      throw CorruptFileError("unsupported postprocess.json version in " + dir.string());
    p.input_role = info.at("input_role").get<std::string>();
  } catch (const json::exception& e) {
    throw CorruptFileError("malformed postprocess.json in " + dir.string() + ": " + e.what());
  }
  p.model = load_model(dir / "postprocess" / "model.bin");
  return p;
}

void preview_middle(const Array3& a, const fs::path& path, const std::string& source) {
  const std::size_t i = a.dim(0) / 2;
  write_pgm_preview(a.plane(i), a.dim(1), a.dim(2), path, source + "[" + std::to_string(i) + "]");
}

}  // namespace

void write_pgm_preview(std::span<const double> plane, std::size_t h, std::size_t w, const fs::path& path,
                       const std::string& source) {
  require(plane.size() == h * w && h > 0 && w > 0, "preview plane has an inconsistent size");
  double lo = plane[0], hi = plane[0];
  for (double v : plane) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::ofstream out = open_text(path);
  out << "P5\n" << w << ' ' << h << "\n255\n";
  for (double v : plane) {
    const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0))));
  }
  if (!out) throw PersistenceError("write failed: " + path.string());
  write_json({{"source", source}, {"width", w}, {"height", h}, {"window_min", lo}, {"window_max", hi}},
             sidecar_path(path));
}

std::vector<ClassicalParams> load_grid(const fs::path& file) {
  const json g = read_json(file);
  if (!g.is_object()) throw ValidationError("grid file must hold a JSON object");
  for (const auto& [key, _] : g.items())
    if (key != "dif" && key != "size" && key != "level" && key != "wavelet" && key != "sigma")
      throw ValidationError("unknown grid field '" + key + "'");
  const ClassicalParams d;
  const auto difs = grid_axis<double>(g, "dif", {d.dif});
  const auto sizes = grid_axis<std::size_t>(g, "size", {d.size});
  const auto levels = grid_axis<std::size_t>(g, "level", {d.level});
  const auto wavelets = grid_axis<std::string>(g, "wavelet", {to_string(d.wavelet)});
  const auto sigmas = grid_axis<double>(g, "sigma", {d.sigma});
  std::vector<ClassicalParams> grid;
  for (double dif : difs)
    for (std::size_t size : sizes)
      for (std::size_t level : levels)
        for (const auto& wname : wavelets)
          for (double sigma : sigmas) {
            ClassicalParams p{dif, size, level, wavelet_from_string(wname), sigma};
            try {
              p.validate();
            } catch (const ValidationError& e) {
              throw ValidationError(std::string("grid entry invalid: ") + e.what());
            }
            grid.push_back(p);
          }
  return grid;
}

void cmd_phantom(const RunContext& ctx) {
  const FoamPhantom ph = generate_foam(ctx.config.phantom);
  DatasetManifest m;
  add_volume(m, ctx.out, "phantom", Quality::HighQuality, ph.volume);
  m.seed = ctx.config.seed;
  m.geometry = {{"size", ctx.config.phantom.size}};
  m.provenance = provenance("phantom", {{"config", ctx.config_json},
                                       {"bubbles_placed", ph.bubbles.size()},
                                       {"bubbles_shortfall", ph.shortfall}});
  m.save(ctx.out / "manifest.json");
  if (ph.shortfall > 0)
    std::cerr << "warning: placed " << ph.bubbles.size() << " of " << ctx.config.phantom.bubbles << " bubbles\n";
}

void cmd_simulate(const RunContext& ctx, const std::optional<fs::path>& phantom_manifest) {
  Volume phantom;
  json inputs = json::object();
  if (phantom_manifest) {
    const DatasetManifest pm = DatasetManifest::load(*phantom_manifest);
    phantom = load_volume(pm.resolve("phantom"));
    inputs["phantom"] = phantom_manifest->string();
  } else {
    phantom = generate_foam(ctx.config.phantom).volume;
  }
  const SimulatedScan scan = simulate_scan(phantom, ctx.config.simulate);

  DatasetManifest m;
  add_volume(m, ctx.out, "phantom", Quality::HighQuality, scan.phantom);
  add_projections(m, ctx.out, "p_hq", Quality::HighQuality, scan.p_hq);
  add_projections(m, ctx.out, "p_lq_clean", Quality::Intermediate, scan.p_lq_clean);
  add_projections(m, ctx.out, "p_lq", Quality::LowQuality, scan.p_lq);
  add_volume(m, ctx.out, "r_hq", Quality::HighQuality, scan.r_hq);
  add_volume(m, ctx.out, "r_lq", Quality::LowQuality, scan.r_lq);
  m.seed = ctx.config.seed;
  m.geometry = {{"hq_angles", ctx.config.simulate.hq_angles},
                {"lq_factor", ctx.config.simulate.lq_factor},
                {"rows", scan.p_hq.rows()},
                {"cols", scan.p_hq.cols()},
                {"attenuation_scale", scan.attenuation_scale}};
  m.degradation = to_json(ctx.config.simulate.degrade);
  m.provenance = provenance("simulate", {{"config", ctx.config_json}, {"inputs", inputs}});
  m.save(ctx.out / "manifest.json");
}

void cmd_train(const RunContext& ctx, const std::string& mode, const std::vector<fs::path>& data_manifests,
               const std::string& input_role, const std::string& resume_from) {
  require(!data_manifests.empty(), "train needs at least one --data manifest");
  std::vector<DatasetManifest> data;
  json inputs = json::array();
  for (const auto& p : data_manifests) {
    data.push_back(DatasetManifest::load(p));
    inputs.push_back(p.string());
  }

  DatasetManifest out_manifest;
  out_manifest.seed = ctx.config.seed;
  if (mode == "multistage") {
    std::vector<TrainingObject> objects;
    for (const auto& m : data) {
      TrainingObject o{load_projections(m.resolve("p_lq")), std::nullopt, load_volume(m.resolve("r_hq"))};
      if (m.find("p_hq")) o.p_hq = load_projections(m.resolve("p_hq"));
      objects.push_back(std::move(o));
    }
    MultiStageTrainOptions opt = ctx.config.multistage_options();
    opt.work_dir = ctx.out;
    opt.resume_from = resume_from;
    const MultiStageModel model = train_multistage(objects, opt);
    out_manifest.provenance = provenance("train", {{"mode", mode},
                                                   {"config", ctx.config_json},
                                                   {"inputs", inputs},
                                                   {"resume_from", resume_from},
                                                   {"parameter_count", model.parameter_count()},
                                                   {"best_epochs",
                                                    {{"p", model.stage_p.best_epoch},
                                                     {"s", model.stage_s.best_epoch},
                                                     {"r", model.stage_r.best_epoch}}}});
  } else if (mode == "postprocess") {
    require(resume_from == "p", "--resume-from applies to multistage training only");
    std::vector<Volume> x, y;
    for (const auto& m : data) {
      x.push_back(load_volume(m.resolve(input_role)));
      y.push_back(load_volume(m.resolve("r_hq")));
    }
    const RegressorSpec spec = ctx.config.postprocess_spec();
    const RegressorModel model =
        train_postprocess(x, y, ctx.config.postprocess, spec, stream_seed(ctx.config, SeedStream::Train));
    save_model(model, ctx.out / "postprocess" / "model.bin");
    write_json({{"version", kModelInfoVersion},
                {"input_role", input_role},
                {"hidden_layers", spec.hidden_layers},
                {"width", spec.width},
                {"parameter_count", spec.parameter_count()},
                {"multistage_parameter_count", ctx.config.multistage_parameter_count()}},
               ctx.out / "postprocess.json");
    out_manifest.provenance = provenance("train", {{"mode", mode},
                                                   {"config", ctx.config_json},
                                                   {"inputs", inputs},
                                                   {"input_role", input_role},
                                                   {"parameter_count", spec.parameter_count()},
                                                   {"best_epoch", model.best_epoch}});
  } else {
    throw ValidationError("--mode must be 'multistage' or 'postprocess' (got '" + mode + "')");
  }
  out_manifest.save(ctx.out / "manifest.json");
}

void cmd_infer(const fs::path& model_dir, const fs::path& data_manifest, const fs::path& out) {
  const DatasetManifest data = DatasetManifest::load(data_manifest);
  DatasetManifest m;
  m.seed = data.seed;
  m.geometry = data.geometry;
  m.degradation = data.degradation;
  json prov = {{"model", model_dir.string()}, {"data", data_manifest.string()}};

  if (is_multistage_dir(model_dir)) {
    const MultiStageModel model = MultiStageModel::load(model_dir);
    const StageArtifacts a = infer_multistage(model, load_projections(data.resolve("p_lq")));
    add_projections(m, out, "p_star", Quality::Intermediate, a.p_star);
    add_sinograms(m, out, "s_star", Quality::Intermediate, a.s_star);
    add_volume(m, out, "r_lq", Quality::LowQuality, a.r_lq);
    add_volume(m, out, "r_pstar", Quality::Intermediate, a.r_pstar);
    add_volume(m, out, "r_sstar", Quality::Intermediate, a.r_sstar);
    add_volume(m, out, "r_star", Quality::HighQuality, a.r_star);
    preview_middle(a.p_star.data, out / "previews" / "p_star.pgm", "p_star");
    preview_middle(a.s_star.data, out / "previews" / "s_star.pgm", "s_star");
    preview_middle(a.r_star.data, out / "previews" / "r_star.pgm", "r_star");
    prov["mode"] = "multistage";
    prov["final_role"] = "r_star";
  } else {
    const PostprocessInfo pp = load_postprocess(model_dir);
    const Volume r = infer_postprocess(pp.model, load_volume(data.resolve(pp.input_role)));
    add_volume(m, out, "r_post", Quality::HighQuality, r);
    preview_middle(r.data, out / "previews" / "r_post.pgm", "r_post");
    prov["mode"] = "postprocess";
    prov["final_role"] = "r_post";
  }
  m.provenance = provenance("infer", prov);
  m.save(out / "manifest.json");
}

void cmd_evaluate(const fs::path& result_manifest, const fs::path& reference_manifest, const std::string& role,
                  const std::string& reference_role, const fs::path& out) {
  const DatasetManifest res = DatasetManifest::load(result_manifest);
  const DatasetManifest ref = DatasetManifest::load(reference_manifest);
  std::string r = role;
  if (r.empty()) r = res.provenance.value("final_role", std::string("r_star"));
  const Volume x = load_volume(res.resolve(r));
  const Volume y = load_volume(ref.resolve(reference_role));
  const MetricReport rep = evaluate_volume(x, y);

  std::ofstream csv = open_text(out / "metrics.csv");
  write_report_csv(csv, rep);
  if (!csv) throw PersistenceError("write failed: " + (out / "metrics.csv").string());
  json summary = report_summary(rep);
  summary["role"] = r;
  summary["reference_role"] = reference_role;
  summary["result"] = result_manifest.string();
  summary["reference"] = reference_manifest.string();
  write_json(summary, out / "metrics.json");
  std::cout << std::setprecision(6) << "mean_psnr " << rep.mean_psnr << "\nmean_ssim " << rep.mean_ssim << '\n';
}

void cmd_gridsearch(const RunContext& ctx, const fs::path& grid_file, const fs::path& data_manifest,
                    const std::string& domain, bool apply_best) {
  const std::vector<ClassicalParams> grid = load_grid(grid_file);
  const DatasetManifest data = DatasetManifest::load(data_manifest);
  GridSearchInput in;
  in.corrupted = load_projections(data.resolve("p_lq"));
  in.median_denoise_size = ctx.config.median_denoise_size;
  if (domain == "projection") {
    in.domain = GridDomain::Projection;
    in.projection_reference = load_projections(data.resolve("p_lq_clean"));
  } else if (domain == "reconstruction") {
    in.domain = GridDomain::Reconstruction;
    in.reconstruction_reference = load_volume(data.resolve("r_hq"));
  } else {
    throw ValidationError("--domain must be 'projection' or 'reconstruction' (got '" + domain + "')");
  }
  const GridSearchResult res = grid_search(grid, in);

  std::ofstream csv = open_text(ctx.out / "scores.csv");
  write_score_csv(csv, res.table);
  if (!csv) throw PersistenceError("write failed: " + (ctx.out / "scores.csv").string());
  write_json({{"version", 1},
              {"domain", domain},
              {"best_index", res.best_index},
              {"best", params_json(res.best)},
              {"mse", res.table[res.best_index].mse}},
             ctx.out / "best.json");

  DatasetManifest m;
  m.seed = data.seed;
  m.geometry = data.geometry;
  m.degradation = data.degradation;
  if (apply_best) {
    add_volume(m, ctx.out, "r_classical", Quality::Intermediate,
               classical_reconstruction(in.corrupted, res.best, ctx.config.median_denoise_size));
    add_volume(m, ctx.out, "r_hq", Quality::HighQuality, load_volume(data.resolve("r_hq")));
  }
  m.provenance = provenance("gridsearch", {{"config", ctx.config_json},
                                           {"grid", grid_file.string()},
                                           {"data", data_manifest.string()},
                                           {"domain", domain},
                                           {"apply_best", apply_best}});
  m.save(ctx.out / "manifest.json");
  std::cout << "best " << params_json(res.best).dump() << " mse " << res.table[res.best_index].mse << '\n';
}

void cmd_bench(const fs::path& model_dir, const fs::path& data_manifest, const fs::path& out) {
  using clock = std::chrono::steady_clock;
  std::vector<StageTiming> rows;
  const auto t0 = clock::now();
  auto lap = t0;
  const auto mark = [&](const std::string& name) {
    const auto now = clock::now();
    rows.push_back({name, std::chrono::duration<double>(now - lap).count()});
    lap = now;
  };

  const DatasetManifest data = DatasetManifest::load(data_manifest);
  if (is_multistage_dir(model_dir)) {
    const MultiStageModel model = MultiStageModel::load(model_dir);
    mark("load_model");
    const ProjectionStack p = load_projections(data.resolve("p_lq"));
    mark("load_data");
    const StageArtifacts a = infer_multistage(model, p);
    for (const auto& t : a.timings) rows.push_back(t);
  } else {
    const PostprocessInfo pp = load_postprocess(model_dir);
    mark("load_model");
    const Volume r = load_volume(data.resolve(pp.input_role));
    mark("load_data");
    (void)infer_postprocess(pp.model, r);
    mark("postprocess");
  }
  const double total = std::chrono::duration<double>(clock::now() - t0).count();
  double sum = 0.0;
  for (const auto& r : rows) sum += r.seconds;
  const double gap = total > 0.0 ? std::fabs(total - sum) / total : 0.0;

  std::ofstream csv = open_text(out / "timing.csv");
  csv << "stage,seconds\n" << std::setprecision(9);
  json stages = json::array();
  std::cout << std::left << std::setw(22) << "stage" << "seconds\n";
  for (const auto& r : rows) {
    csv << r.name << ',' << r.seconds << '\n';
    stages.push_back({{"stage", r.name}, {"seconds", r.seconds}});
    std::cout << std::setw(22) << r.name << std::fixed << std::setprecision(4) << r.seconds << '\n';
  }
  std::cout << std::setw(22) << "total" << total << '\n';
  csv << "total," << total << '\n';
  if (!csv) throw PersistenceError("write failed: " + (out / "timing.csv").string());
  write_json({{"version", 1}, {"stages", stages}, {"stage_sum", sum}, {"total", total}, {"relative_gap", gap}},
             out / "timing.json");
}

}  // namespace ctstage::cli
