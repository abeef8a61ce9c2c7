#include <doctest.h>

#include <cmath>
#include <fstream>

#include "ctstage/geometry.hpp"
#include "ctstage/multistage.hpp"
#include "ctstage/simulate.hpp"
#include "scratch_dir.hpp"

using namespace ctstage;
using testing_support::ScratchDir;

namespace {

SimulatedScan small_scan(std::uint64_t seed, std::size_t n = 24, std::size_t hq = 32) {
  FoamSpec f;
  f.size = n;
  f.bubbles = 12;
  f.r_min = 1.5;
  f.r_max = 3.0;
  f.seed = seed;
  SimulationSpec s;
  s.hq_angles = hq;
  s.lq_factor = 4;
  s.degrade.P_ring = 0.1;
  s.degrade.P_zinger = 0.001;
  s.degrade.seed = seed + 100;
  return simulate_scan(generate_foam(f).volume, s);
}

std::vector<TrainingObject> objects_from(const std::vector<SimulatedScan>& scans) {
  std::vector<TrainingObject> out;
  for (const auto& s : scans) out.push_back({s.p_lq, s.p_hq, s.r_hq});
  return out;
}

MultiStageTrainOptions quick_options(std::size_t epochs) {
  MultiStageTrainOptions o;
  o.hidden_layers = 2;
  o.width = 4;
  o.seed = 5;
  for (TrainConfig* c : {&o.configs.projection, &o.configs.sinogram, &o.configs.reconstruction}) {
    c->epochs = epochs;
    c->steps_per_epoch = 6;
    c->max_validation_pairs = 4;
  }
  return o;
}

std::vector<char> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("simulated scans have consistent shapes, angles and units") {
  const SimulatedScan s = small_scan(1);
  CHECK(s.p_hq.data.shape() == Shape3{32, 24, 24});
  CHECK(s.p_lq.data.shape() == Shape3{8, 24, 24});
  CHECK(s.p_lq_clean.data.shape() == Shape3{8, 24, 24});
  for (std::size_t k = 0; k < 8; ++k) CHECK(s.p_lq.angles[k] == s.p_hq.angles[4 * k]);
  CHECK(s.r_hq.data.shape() == Shape3{24, 24, 24});
  CHECK(s.r_hq.mask_applied);
  CHECK(s.r_lq.mask_applied);
  // Mean transmission over rays that hit the object.
  double t = 0.0, n = 0.0;
  for (double v : s.p_hq.data.values())
    if (v > 0.0) {
      t += std::exp(-v);
      n += 1.0;
    }
  CHECK(t / n == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s.attenuation_scale > 0.0);
}

TEST_CASE("identity stages reproduce the plain upsampled reconstruction") {
  const std::vector<SimulatedScan> scans{small_scan(1), small_scan(2)};
  const MultiStageModel model = train_multistage(objects_from(scans), quick_options(0));
  CHECK(model.upsample_rows() == 32);
  const ProjectionStack& p = scans[0].p_lq;
  const StageArtifacts a = infer_multistage(model, p);
  CHECK(a.p_star.data == p.data);
  const SinogramStack up = upsample_sinogram(rearrange(p), 32);
  CHECK(a.s_lq_up.data == up.data);
  CHECK(a.s_star.data == up.data);
  const Volume plain = circular_mask(fbp(up, ParallelGeometry{up.angles, 24, 24}));
  CHECK(a.r_sstar.data == plain.data);
  CHECK(a.r_star.data == plain.data);
  CHECK(a.r_star.mask_applied);
  CHECK(a.r_lq.data == circular_mask(fbp(rearrange(p), model.lq_geometry())).data);
}

TEST_CASE("zero input through identity stages gives a zero reconstruction") {
  const std::vector<SimulatedScan> scans{small_scan(1), small_scan(2)};
  const MultiStageModel model = train_multistage(objects_from(scans), quick_options(0));
  const ProjectionStack zero{Array3({8, 24, 24}), scans[0].p_lq.angles};
  const StageArtifacts a = infer_multistage(model, zero);
  CHECK(a.r_star.data == Array3({24, 24, 24}));
}

TEST_CASE("intermediate shapes and timings") {
  const std::vector<SimulatedScan> scans{small_scan(3, 48, 64), small_scan(4, 48, 64)};
  const MultiStageModel model = train_multistage(objects_from(scans), quick_options(1));
  const StageArtifacts a = infer_multistage(model, scans[0].p_lq);
  CHECK(a.p_star.data.shape() == Shape3{16, 48, 48});
  CHECK(a.s_star.data.shape() == Shape3{48, 64, 48});
  CHECK(a.s_pstar_up.data.shape() == Shape3{48, 64, 48});
  CHECK(a.r_lq.data.shape() == Shape3{48, 48, 48});
  CHECK(a.r_pstar.data.shape() == Shape3{48, 48, 48});
  CHECK(a.r_sstar.data.shape() == Shape3{48, 48, 48});
  CHECK(a.r_star.data.shape() == Shape3{48, 48, 48});
  double sum = 0.0;
  for (const auto& t : a.timings) {
    CHECK(t.seconds >= 0.0);
    sum += t.seconds;
  }
  REQUIRE(a.total_seconds > 0.0);
  MESSAGE("stage sum " << sum << " s, total " << a.total_seconds << " s");
  CHECK(std::fabs(sum - a.total_seconds) / a.total_seconds <= 0.05);
}

TEST_CASE("trained pipeline is deterministic and survives a save/load") {
  ScratchDir dir("ms_save");
  const std::vector<SimulatedScan> scans{small_scan(1), small_scan(2)};
  const MultiStageModel a = train_multistage(objects_from(scans), quick_options(2));
  const MultiStageModel b = train_multistage(objects_from(scans), quick_options(2));
  for (std::size_t l = 0; l < a.stage_r.layers.size(); ++l)
    CHECK(a.stage_r.layers[l].weights == b.stage_r.layers[l].weights);
  const StageArtifacts x = infer_multistage(a, scans[0].p_lq), y = infer_multistage(a, scans[0].p_lq);
  CHECK(x.r_star.data == y.r_star.data);

  a.save(dir.path());
  const MultiStageModel back = MultiStageModel::load(dir.path());
  CHECK(back.lq_angles == a.lq_angles);
  CHECK(back.hq_angles == a.hq_angles);
  CHECK(back.parameter_count() == a.parameter_count());
  CHECK(infer_multistage(back, scans[0].p_lq).r_star.data == x.r_star.data);
  for (const auto& t : x.timings) CHECK(std::isfinite(t.seconds));
  for (const auto* m : {&a.stage_p, &a.stage_s, &a.stage_r})
    for (const auto& e : m->history) CHECK(std::isfinite(e.val_loss));
}

TEST_CASE("later stage configs never change earlier checkpoints") {
  ScratchDir d1("ms_seq1"), d2("ms_seq2");
  const std::vector<SimulatedScan> scans{small_scan(1), small_scan(2)};
  MultiStageTrainOptions o1 = quick_options(2);
  o1.work_dir = d1.path();
  MultiStageTrainOptions o2 = o1;
  o2.work_dir = d2.path();
  o2.configs.reconstruction.learning_rate = 3e-3;
  o2.configs.reconstruction.epochs = 3;
  train_multistage(objects_from(scans), o1);
  train_multistage(objects_from(scans), o2);
  CHECK(file_bytes(d1 / "stage_p" / "model.bin") == file_bytes(d2 / "stage_p" / "model.bin"));
  CHECK(file_bytes(d1 / "stage_s" / "model.bin") == file_bytes(d2 / "stage_s" / "model.bin"));
  CHECK(file_bytes(d1 / "stage_r" / "model.bin") != file_bytes(d2 / "stage_r" / "model.bin"));
  CHECK(std::filesystem::exists(d1 / "intermediates" / "object_0" / "p_star.raw"));
  CHECK(std::filesystem::exists(d1 / "intermediates" / "object_1" / "s_star.raw"));
}

TEST_CASE("resuming at a later stage reuses earlier checkpoints") {
  ScratchDir d1("ms_resume1");
  const std::vector<SimulatedScan> scans{small_scan(1), small_scan(2)};
  MultiStageTrainOptions o = quick_options(2);
  o.work_dir = d1.path();
  train_multistage(objects_from(scans), o);
  const auto p_bytes = file_bytes(d1 / "stage_p" / "model.bin");
  const auto r_bytes = file_bytes(d1 / "stage_r" / "model.bin");
  std::filesystem::remove(d1 / "stage_r" / "model.bin");

  o.resume_from = "r";
  train_multistage(objects_from(scans), o);
  CHECK(file_bytes(d1 / "stage_p" / "model.bin") == p_bytes);
  CHECK(file_bytes(d1 / "stage_r" / "model.bin") == r_bytes);

  ScratchDir empty("ms_resume_empty");
  o.work_dir = empty.path();
  CHECK_THROWS(train_multistage(objects_from(scans), o));
}

TEST_CASE("reference angle handling") {
  const std::vector<SimulatedScan> scans{small_scan(1), small_scan(2)};
  std::vector<TrainingObject> objs = objects_from(scans);
  objs[1].p_hq->angles[0] += 0.01;
  CHECK_THROWS_AS(train_multistage(objs, quick_options(0)), ValidationError);

  // Simulated mode needs no HQ projections.
  std::vector<TrainingObject> sim = objects_from(scans);
  for (auto& o : sim) o.p_hq.reset();
  MultiStageTrainOptions opt = quick_options(1);
  CHECK_THROWS_AS(train_multistage(sim, opt), ValidationError);
  opt.reference_mode = ReferenceMode::SimulatedFromReconstruction;
  opt.hq_angles = 32;
  const MultiStageModel m = train_multistage(sim, opt);
  CHECK(m.upsample_rows() == 32);
  CHECK(m.reference_mode == ReferenceMode::SimulatedFromReconstruction);
  CHECK(reference_mode_from_string(to_string(m.reference_mode)) == m.reference_mode);
}

TEST_CASE("inference rejects a mismatched geometry") {
  const std::vector<SimulatedScan> scans{small_scan(1), small_scan(2)};
  const MultiStageModel model = train_multistage(objects_from(scans), quick_options(0));
  CHECK_THROWS_AS(infer_multistage(model, scans[0].p_hq), ValidationError);
  ProjectionStack shifted = scans[0].p_lq;
  shifted.angles[1] += 1e-3;
  CHECK_THROWS_AS(infer_multistage(model, shifted), ValidationError);
}

TEST_CASE("post-processing baseline") {
  const std::vector<SimulatedScan> scans{small_scan(1), small_scan(2)};
  const std::vector<Volume> lq{scans[0].r_lq, scans[1].r_lq}, hq{scans[0].r_hq, scans[1].r_hq};
  TrainConfig cfg;
  cfg.epochs = 0;
  const RegressorModel id = train_postprocess(lq, hq, cfg, {1, 2, 4, true}, 3);
  CHECK(infer_postprocess(id, scans[0].r_lq).data == scans[0].r_lq.data);

  const std::size_t budget = RegressorSpec{1, 4, 16, true}.parameter_count() +
                             RegressorSpec{2, 4, 16, true}.parameter_count() +
                             RegressorSpec{3, 4, 16, true}.parameter_count();
  const RegressorSpec spec = budget_matched_postprocess_spec(budget, 4);
  CHECK(spec.in_channels == 1);
  const double gap = std::fabs(static_cast<double>(spec.parameter_count()) - static_cast<double>(budget));
  CHECK(gap / static_cast<double>(budget) <= 0.10);

  cfg.epochs = 2;
  cfg.steps_per_epoch = 5;
  const RegressorModel trained = train_postprocess(lq, hq, cfg, {1, 2, 4, true}, 3);
  const Volume out = infer_postprocess(trained, scans[0].r_lq);
  CHECK(out.mask_applied);
  CHECK(out.data.all_finite());
  CHECK(circular_mask(out).data == out.data);
}
