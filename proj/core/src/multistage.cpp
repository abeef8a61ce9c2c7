#include "ctstage/multistage.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ctstage/error.hpp"
#include "ctstage/io.hpp"
#include "ctstage/rng.hpp"

namespace ctstage {

namespace fs = std::filesystem;

namespace {

constexpr int kManifestVersion = 1;
constexpr std::uint64_t kStagePStream = 21, kStageSStream = 22, kStageRStream = 23;

// Stacks plane `i` of each source into a (sources.size(), H, W) array.
Array3 gather(std::initializer_list<const Array3*> sources, std::size_t i) {
  const Array3& first = **sources.begin();
  const std::size_t h = first.dim(1), w = first.dim(2);
  Array3 out({sources.size(), h, w});
  std::size_t c = 0;
  for (const Array3* s : sources) {
    const auto src = s->plane(i);
    std::copy(src.begin(), src.end(), out.plane(c++).begin());
  }
  return out;
}

Array3 single_plane(const Array3& a, std::size_t i) { return gather({&a}, i); }

void set_plane(Array3& dst, std::size_t i, const Array3& src) {
  const auto s = src.plane(0);
  std::copy(s.begin(), s.end(), dst.plane(i).begin());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool contains_angle(const std::vector<double>& angles, double a, std::size_t* index) {
  for (std::size_t i = 0; i < angles.size(); ++i)
    if (std::fabs(angles[i] - a) <= 1e-9) {
      *index = i;
      return true;
    }
  return false;
}

RegressorModel init_stage(std::size_t channels, const MultiStageTrainOptions& o, std::uint64_t stream) {
  RegressorSpec spec;
  spec.in_channels = channels;
  spec.hidden_layers = o.hidden_layers;
  spec.width = o.width;
  return RegressorModel::initialize(spec, derive_seed(o.seed, stream));
}

TrainConfig seeded(TrainConfig c, std::uint64_t seed, std::uint64_t stream) {
  c.seed = derive_seed(seed, stream);
  return c;
}

// Per-object data that flows between stages.
struct ObjectState {
  ProjectionStack p_lq_target;  // stage-1 target at LQ angles
  SinogramStack s_hq;           // stage-2 target at HQ angles
  ProjectionStack p_star;
  SinogramStack s_lq_up, s_pstar_up, s_star;
};

int stage_rank(const std::string& s) {
  if (s == "p") return 0;
  if (s == "s") return 1;
  if (s == "r") return 2;
  throw ValidationError("resume_from must be one of p, s, r (got '" + s + "')");
}

nlohmann::json manifest_json(const MultiStageModel& m) {
  return {{"version", kManifestVersion},
          {"rows", m.rows},
          {"cols", m.cols},
          {"lq_angles", m.lq_angles},
          {"hq_angles", m.hq_angles},
          {"upsample_rows", m.upsample_rows()},
          {"reference_mode", to_string(m.reference_mode)},
          {"stages",
           {{"p", {{"path", "stage_p/model.bin"}, {"channels", 1}}},
            {"s", {{"path", "stage_s/model.bin"}, {"channels", 2}}},
            {"r", {{"path", "stage_r/model.bin"}, {"channels", 3}}}}}};
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw PersistenceError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw PersistenceError("write failed: " + path.string());
}

fs::path object_dir(const fs::path& work, std::size_t i) { return work / "intermediates" / ("object_" + std::to_string(i)); }

}  // namespace

std::string to_string(ReferenceMode m) {
  return m == ReferenceMode::AngleSubset ? "angle_subset" : "simulated";
}

ReferenceMode reference_mode_from_string(const std::string& s) {
  if (s == "angle_subset") return ReferenceMode::AngleSubset;
  if (s == "simulated") return ReferenceMode::SimulatedFromReconstruction;
  throw ValidationError("reference_mode must be 'angle_subset' or 'simulated' (got '" + s + "')");
}

StageConfigs default_stage_configs() {
  StageConfigs c;
  c.sinogram.augment.rotate = false;
  return c;
}

std::size_t MultiStageModel::parameter_count() const {
  return stage_p.parameter_count() + stage_s.parameter_count() + stage_r.parameter_count();
}

void MultiStageModel::validate() const {
  stage_p.validate();
  stage_s.validate();
  stage_r.validate();
  require(stage_p.spec.in_channels == 1, "stage p must take 1 channel");
  require(stage_s.spec.in_channels == 2, "stage s must take 2 channels");
  require(stage_r.spec.in_channels == 3, "stage r must take 3 channels");
  require(rows > 0 && cols > 0, "multistage model has an empty detector");
  validate_angles(lq_angles, lq_angles.size());
  validate_angles(hq_angles, hq_angles.size());
  require(lq_angles.size() >= 2, "multistage model needs at least 2 LQ angles");
  require(is_equispaced(hq_angles), "multistage HQ angles must be equispaced");
}

void MultiStageModel::save(const fs::path& dir) const {
  validate();
  save_model(stage_p, dir / "stage_p" / "model.bin");
  save_model(stage_s, dir / "stage_s" / "model.bin");
  save_model(stage_r, dir / "stage_r" / "model.bin");
  write_json(manifest_json(*this), dir / "multistage.json");
}

MultiStageModel MultiStageModel::load(const fs::path& dir) {
  const fs::path mpath = dir / "multistage.json";
  std::ifstream in(mpath);
  if (!in) throw PersistenceError("cannot open " + mpath.string());
  MultiStageModel m;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("version").get<int>() != kManifestVersion)
      throw CorruptFileError("unsupported multistage manifest version in " + mpath.string());
    m.rows = j.at("rows").get<std::size_t>();
    m.cols = j.at("cols").get<std::size_t>();
    m.lq_angles = j.at("lq_angles").get<std::vector<double>>();
    m.hq_angles = j.at("hq_angles").get<std::vector<double>>();
    m.reference_mode = reference_mode_from_string(j.at("reference_mode").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError("malformed multistage manifest " + mpath.string() + ": " + e.what());
  }
  m.stage_p = load_model(dir / "stage_p" / "model.bin");
  m.stage_s = load_model(dir / "stage_s" / "model.bin");
  m.stage_r = load_model(dir / "stage_r" / "model.bin");
  try {
    m.validate();
  } catch (const ValidationError& e) {
    throw CorruptFileError("inconsistent multistage model in " + dir.string() + ": " + e.what());
  }
  return m;
}

Volume reconstruct_masked(const SinogramStack& s) {
  ParallelGeometry g{s.angles, s.rows(), s.cols()};
  return circular_mask(fbp(s, g));
}

ProjectionStack apply_projection_stage(const RegressorModel& f, const ProjectionStack& p) {
  ProjectionStack out{Array3(p.data.shape()), p.angles};
  for (std::size_t a = 0; a < p.n_angles(); ++a) set_plane(out.data, a, predict(f, single_plane(p.data, a)));
  return out;
}

SinogramStack apply_sinogram_stage(const RegressorModel& f, const SinogramStack& s_pstar_up,
                                   const SinogramStack& s_lq_up) {
  require(s_pstar_up.data.shape() == s_lq_up.data.shape(), "sinogram stage inputs differ in shape");
  SinogramStack out{Array3(s_pstar_up.data.shape()), s_pstar_up.angles};
  for (std::size_t m = 0; m < out.rows(); ++m)
    set_plane(out.data, m, predict(f, gather({&s_pstar_up.data, &s_lq_up.data}, m)));
  return out;
}

Volume apply_reconstruction_stage(const RegressorModel& f, const Volume& r_sstar, const Volume& r_pstar,
                                  const Volume& r_lq) {
  require(r_sstar.data.shape() == r_pstar.data.shape() && r_sstar.data.shape() == r_lq.data.shape(),
          "reconstruction stage inputs differ in shape");
  Volume out{Array3(r_sstar.data.shape()), false};
  for (std::size_t z = 0; z < out.slices(); ++z)
    set_plane(out.data, z, predict(f, gather({&r_sstar.data, &r_pstar.data, &r_lq.data}, z)));
  return circular_mask(std::move(out));
}

MultiStageModel train_multistage(const std::vector<TrainingObject>& objects, const MultiStageTrainOptions& o) {
  require(!objects.empty(), "multistage training needs at least one object");
  const int start_rank = stage_rank(o.resume_from);
  require(start_rank == 0 || o.work_dir.has_value(), "resuming from a later stage requires a work directory");
  o.configs.projection.validate();
  o.configs.sinogram.validate();
  o.configs.reconstruction.validate();

  MultiStageModel model;
  model.reference_mode = o.reference_mode;
  const ProjectionStack& first = objects.front().p_lq;
  model.rows = first.rows();
  model.cols = first.cols();
  model.lq_angles = first.angles;

  std::size_t n_hq = o.hq_angles;
  if (n_hq == 0) {
    require(objects.front().p_hq.has_value(), "hq_angles must be given when no HQ projections are supplied");
    n_hq = objects.front().p_hq->n_angles();
  }
  model.hq_angles = equispaced_angles(n_hq);
  require(n_hq >= model.lq_angles.size(), "HQ angle count must not be below the LQ angle count");

  std::vector<ObjectState> state(objects.size());
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const TrainingObject& obj = objects[i];
    obj.p_lq.validate();
    obj.r_hq.validate();
    require(obj.p_lq.data.shape() == first.data.shape(), "all LQ scans must share one shape");
    require(obj.p_lq.angles == model.lq_angles, "all LQ scans must share one angle set");
    require(obj.r_hq.data.shape() == Shape3{model.rows, model.cols, model.cols},
            "HQ reconstruction shape does not match the scan");
    ObjectState& st = state[i];
    if (o.reference_mode == ReferenceMode::AngleSubset) {
      if (!obj.p_hq) throw ValidationError("object " + std::to_string(i) + " has no HQ projections");
      const ProjectionStack& hq = *obj.p_hq;
      hq.validate();
      require(hq.rows() == model.rows && hq.cols() == model.cols, "HQ projection shape does not match the scan");
      require(hq.n_angles() == n_hq && is_equispaced(hq.angles),
              "HQ projections must cover the equispaced HQ angle set");
      st.p_lq_target = ProjectionStack{Array3(obj.p_lq.data.shape()), model.lq_angles};
      for (std::size_t a = 0; a < model.lq_angles.size(); ++a) {
        std::size_t k = 0;
        if (!contains_angle(hq.angles, model.lq_angles[a], &k))
          throw ValidationError("LQ angle " + std::to_string(model.lq_angles[a]) +
                                " is not among the HQ angles; use the simulated reference mode");
        set_plane(st.p_lq_target.data, a, single_plane(hq.data, k));
      }
      st.s_hq = rearrange(hq);
    } else {
      Volume ref = obj.r_hq;
      st.p_lq_target = forward_project(ref, model.lq_geometry());
      st.s_hq = rearrange(forward_project(ref, model.hq_geometry()));
    }
  }

  const auto stage_path = [&](const char* name) { return *o.work_dir / name / "model.bin"; };
  const auto persist = [&](const auto& fn) {
    if (o.work_dir) fn();
  };

  // Stage p.
  if (start_rank <= 0) {
    std::vector<TrainingPair> pairs;
    for (std::size_t i = 0; i < objects.size(); ++i)
      for (std::size_t a = 0; a < model.lq_angles.size(); ++a)
        pairs.push_back({single_plane(objects[i].p_lq.data, a), single_plane(state[i].p_lq_target.data, a)});
    model.stage_p = train(init_stage(1, o, kStagePStream), pairs, seeded(o.configs.projection, o.seed, kStagePStream));
    persist([&] { save_model(model.stage_p, stage_path("stage_p")); });
  } else {
    model.stage_p = load_model(stage_path("stage_p"));
  }
  for (std::size_t i = 0; i < objects.size(); ++i) {
    ObjectState& st = state[i];
    st.p_star = apply_projection_stage(model.stage_p, objects[i].p_lq);
    st.s_lq_up = upsample_sinogram(rearrange(objects[i].p_lq), n_hq);
    st.s_pstar_up = upsample_sinogram(rearrange(st.p_star), n_hq);
    persist([&] { save_projections(st.p_star, object_dir(*o.work_dir, i) / "p_star.raw"); });
  }

  // Stage s.
  if (start_rank <= 1) {
    std::vector<TrainingPair> pairs;
    for (const ObjectState& st : state)
      for (std::size_t m = 0; m < model.rows; ++m)
        pairs.push_back({gather({&st.s_pstar_up.data, &st.s_lq_up.data}, m), single_plane(st.s_hq.data, m)});
    model.stage_s = train(init_stage(2, o, kStageSStream), pairs, seeded(o.configs.sinogram, o.seed, kStageSStream));
    persist([&] { save_model(model.stage_s, stage_path("stage_s")); });
  } else {
    model.stage_s = load_model(stage_path("stage_s"));
  }
  for (std::size_t i = 0; i < objects.size(); ++i) {
    ObjectState& st = state[i];
    st.s_star = apply_sinogram_stage(model.stage_s, st.s_pstar_up, st.s_lq_up);
    persist([&] { save_sinograms(st.s_star, object_dir(*o.work_dir, i) / "s_star.raw"); });
  }

  // Stage r.
  {
    std::vector<TrainingPair> pairs;
    for (std::size_t i = 0; i < objects.size(); ++i) {
      const ObjectState& st = state[i];
      const Volume r_sstar = reconstruct_masked(st.s_star);
      const Volume r_pstar = reconstruct_masked(rearrange(st.p_star));
      const Volume r_lq = reconstruct_masked(rearrange(objects[i].p_lq));
      for (std::size_t z = 0; z < model.rows; ++z)
        pairs.push_back({gather({&r_sstar.data, &r_pstar.data, &r_lq.data}, z), single_plane(objects[i].r_hq.data, z)});
    }
    model.stage_r =
        train(init_stage(3, o, kStageRStream), pairs, seeded(o.configs.reconstruction, o.seed, kStageRStream));
  }

  persist([&] { model.save(*o.work_dir); });
  model.validate();
  return model;
}

StageArtifacts infer_multistage(const MultiStageModel& model, const ProjectionStack& p_lq) {
  model.validate();
  p_lq.validate();
  require(p_lq.angles.size() == model.lq_angles.size(), "scan angle count does not match the model");
  for (std::size_t a = 0; a < p_lq.angles.size(); ++a)
    require(std::fabs(p_lq.angles[a] - model.lq_angles[a]) <= 1e-9, "scan angles do not match the model");
  require(p_lq.rows() == model.rows && p_lq.cols() == model.cols, "scan detector shape does not match the model");

  StageArtifacts out;
  const auto t0 = std::chrono::steady_clock::now();
  auto lap = t0;
  const auto mark = [&](const char* name) {
    const auto now = std::chrono::steady_clock::now();
    out.timings.push_back({name, std::chrono::duration<double>(now - lap).count()});
    lap = now;
  };

  out.p_star = apply_projection_stage(model.stage_p, p_lq);
  mark("stage_p");
  out.s_lq_up = upsample_sinogram(rearrange(p_lq), model.upsample_rows());
  out.s_pstar_up = upsample_sinogram(rearrange(out.p_star), model.upsample_rows());
  mark("rearrange_upsample");
  out.s_star = apply_sinogram_stage(model.stage_s, out.s_pstar_up, out.s_lq_up);
  mark("stage_s");
  out.r_sstar = reconstruct_masked(out.s_star);
  out.r_pstar = reconstruct_masked(rearrange(out.p_star));
  out.r_lq = reconstruct_masked(rearrange(p_lq));
  mark("reconstruct");
  out.r_star = apply_reconstruction_stage(model.stage_r, out.r_sstar, out.r_pstar, out.r_lq);
  mark("stage_r");
  out.total_seconds = seconds_since(t0);
  return out;
}

RegressorModel train_postprocess(const std::vector<Volume>& r_lq, const std::vector<Volume>& r_hq,
                                 const TrainConfig& config, const RegressorSpec& spec, std::uint64_t seed) {
  require(!r_lq.empty() && r_lq.size() == r_hq.size(), "post-processing needs matching LQ and HQ volumes");
  require(spec.in_channels == 1, "post-processing network takes 1 channel");
  std::vector<TrainingPair> pairs;
  for (std::size_t i = 0; i < r_lq.size(); ++i) {
    require(r_lq[i].data.shape() == r_hq[i].data.shape(), "post-processing volume shape mismatch");
    for (std::size_t z = 0; z < r_lq[i].slices(); ++z)
      pairs.push_back({single_plane(r_lq[i].data, z), single_plane(r_hq[i].data, z)});
  }
  TrainConfig c = config;
  c.seed = derive_seed(seed, 24);
  return train(RegressorModel::initialize(spec, derive_seed(seed, 25)), pairs, c);
}

Volume infer_postprocess(const RegressorModel& model, const Volume& r_lq) {
  model.validate();
  require(model.spec.in_channels == 1, "post-processing network takes 1 channel");
  Volume out{Array3(r_lq.data.shape()), false};
  for (std::size_t z = 0; z < r_lq.slices(); ++z) set_plane(out.data, z, predict(model, single_plane(r_lq.data, z)));
  return circular_mask(std::move(out));
}

RegressorSpec budget_matched_postprocess_spec(std::size_t budget, std::size_t hidden_layers) {
  RegressorSpec s;
  s.in_channels = 1;
  s.hidden_layers = hidden_layers;
  s.width = budget_matched_width(budget, 1, hidden_layers);
  return s;
}

}  // namespace ctstage
