#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>

#include "meshloc/common/errors.hpp"
#include "meshloc/common/parallel.hpp"
#include "meshloc/gnn/embedder.hpp"
#include "meshloc/io/descriptor_cache.hpp"
#include "meshloc/io/image_io.hpp"
#include "meshloc/io/pipeline_config.hpp"
#include "meshloc/io/plot.hpp"
#include "meshloc/io/pose_io.hpp"
#include "meshloc/io/report.hpp"
#include "meshloc/io/scene_io.hpp"
#include "meshloc/match/matcher.hpp"
#include "meshloc/num/checkpoint.hpp"
#include "meshloc/synth/localize.hpp"
#include "meshloc/synth/render.hpp"
#include "meshloc/synth/scene_gen.hpp"
#include "meshloc/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace meshloc;

namespace {

io::PipelineConfig load_config_or_default(const std::string& explicit_path,
                                          const std::string& checkpoint_path) {
  if (!explicit_path.empty()) return io::load_pipeline_config(explicit_path);
  if (!checkpoint_path.empty()) {
    const std::string sidecar = checkpoint_path + ".config.json";
    if (fs::exists(sidecar)) return io::load_pipeline_config(sidecar);
  }
  io::PipelineConfig cfg;
  cfg.validate();
  return cfg;
}

struct LoadedScene {
  io::SceneMeta meta;
  scene::TriangleMesh mesh;
  std::vector<scene::RigidTransform> gt_poses;  // aligned with meta.frames
  std::string dir;

  scene::FrameRecord frame(std::size_t index, int width, int height) const {
    return io::load_frame(dir, meta, meta.frames.at(index), gt_poses.at(index), width, height);
  }
};

LoadedScene load_scene_dir(const std::string& dir, int expect_w, int expect_h) {
  (void)expect_w;
  (void)expect_h;
  LoadedScene out;
  out.dir = dir;
  out.meta = io::read_scene_meta((fs::path(dir) / "scene.json").string());
  out.mesh = scene::load_mesh((fs::path(dir) / "mesh.ply").string());
  derive_static_flags(out.mesh, out.meta.palette);
  out.gt_poses = io::read_pose_blocks((fs::path(dir) / "poses_gt.txt").string());
  if (out.gt_poses.size() != out.meta.frames.size())
    throw DataError(dir + ": poses_gt.txt holds " + std::to_string(out.gt_poses.size()) +
                    " poses for " + std::to_string(out.meta.frames.size()) + " frames");
  return out;
}

int run_generate_scene(std::uint64_t seed, const std::string& out_dir, int frames,
                       const synth::SceneParams& params) {
  synth::SceneParams p = params;
  if (frames > 0) p.trajectory_length = frames;
  const synth::SyntheticScene sc = synth::generate_scene(seed, p);

  fs::create_directories(fs::path(out_dir) / "frames");
  save_mesh((fs::path(out_dir) / "mesh.ply").string(), sc.mesh);

  io::SceneMeta meta;
  meta.seed = seed;
  meta.intrinsics = sc.intrinsics;
  meta.depth_scale = 0.001;
  meta.palette = sc.palette;

  std::vector<scene::RigidTransform> gt;
  const int config_count = static_cast<int>(sc.configurations.size());
  for (std::size_t k = 0; k < sc.trajectory.size(); ++k) {
    const int config = static_cast<int>(k) % config_count;
    const scene::FrameRecord frame =
        synth::render_rgbd(sc, config, sc.trajectory[k], sc.intrinsics);
    char name[64];
    std::snprintf(name, sizeof(name), "frames/frame_%06zu", k);
    const std::string rgb = std::string(name) + ".ppm";
    const std::string depth = std::string(name) + ".pgm";
    io::write_ppm((fs::path(out_dir) / rgb).string(), frame.rgb);
    io::write_pgm16((fs::path(out_dir) / depth).string(), frame.depth, meta.depth_scale);
    meta.frames.push_back({static_cast<int>(k), config, rgb, depth});
    gt.push_back(sc.trajectory[k]);
  }
  io::write_pose_blocks((fs::path(out_dir) / "poses_gt.txt").string(), gt);
  io::write_scene_meta((fs::path(out_dir) / "scene.json").string(), meta);
  std::cout << "scene written to " << out_dir << ": " << sc.mesh.vertex_count() << " vertices, "
            << meta.frames.size() << " frames, " << config_count << " configurations\n";
  return 0;
}

int run_train(const std::string& config_path, const std::vector<std::string>& scene_dirs,
              const std::string& checkpoint_path, const std::string& log_path) {
  io::PipelineConfig cfg = load_config_or_default(config_path, "");
  const img::GridHierarchy grid = cfg.grid();

  std::vector<train::TrainingScene> scenes;
  scene::PinholeCamera cam;
  for (const auto& dir : scene_dirs) {
    LoadedScene loaded = load_scene_dir(dir, cfg.grid_width, cfg.grid_height);
    cam = loaded.meta.intrinsics;
    std::vector<scene::FrameRecord> training_frames;
    for (std::size_t k = 0; k < loaded.meta.frames.size(); ++k) {
      if (loaded.meta.frames[k].config != 0) continue;  // configuration 0 trains
      training_frames.push_back(loaded.frame(k, cfg.grid_width, cfg.grid_height));
    }
    if (training_frames.empty())
      throw DataError(dir + ": no configuration-0 frames to train on");
    scenes.push_back(train::prepare_scene(loaded.mesh, std::move(training_frames), cam, grid,
                                          cfg.train.occlusion));
  }

  num::ParamSet params;
  Rng init(cfg.train.seed);
  init_gnn_params(cfg.gnn, params, init);
  init_cnn_params(cfg.cnn, params, init);
  match::init_match_params(cfg.cnn.head_widths, params, init);

  std::ofstream log;
  const std::string log_file = log_path.empty() ? checkpoint_path + ".log.csv" : log_path;
  log.open(log_file);
  if (!log) throw DataError(log_file + ": cannot open for writing");
  log << "stage,epoch,total,confidence,similarity,offset,norm,frames\n";

  run_training(scenes, params, cam, grid, cfg.gnn, cfg.cnn, cfg.train,
               [&](const train::TrainLogRow& row) {
                 log << row.stage << ',' << row.epoch << ',' << row.stats.total << ','
                     << row.stats.confidence << ',' << row.stats.similarity << ','
                     << row.stats.offset << ',' << row.stats.norm << ',' << row.stats.frames
                     << '\n';
                 log.flush();
                 std::cout << "stage " << row.stage << " epoch " << row.epoch
                           << " loss " << row.stats.total << "\n";
               });

  save_checkpoint(checkpoint_path, params);
  write_pipeline_config(checkpoint_path + ".config.json", cfg);
  std::cout << "checkpoint written to " << checkpoint_path << "\n";
  return 0;
}

int run_embed_mesh(const std::string& checkpoint_path, const std::string& mesh_path,
                   const std::string& cache_path, const std::string& config_path) {
  io::PipelineConfig cfg = load_config_or_default(config_path, checkpoint_path);
  num::ParamSet params = num::load_checkpoint<double>(checkpoint_path);
  scene::TriangleMesh mesh = scene::load_mesh(mesh_path);
  auto [normalized, norm] = scene::normalize_mesh(mesh);
  (void)norm;
  const auto adjacency = scene::build_adjacency(normalized);
  const gnn::VertexDescriptorSet set = embed_vertices(normalized, adjacency, cfg.gnn, params);
  io::write_descriptor_cache(cache_path, num::hash_file(mesh_path),
                             num::hash_file(checkpoint_path), set.descriptors);
  std::cout << "cached " << set.descriptors.rows() << " descriptors of width "
            << set.descriptors.cols() << " to " << cache_path << "\n";
  return 0;
}

int run_localize(const std::string& checkpoint_path, const std::string& cache_path,
                 const std::string& frames_dir, const std::string& poses_out, bool oracle,
                 const std::string& config_path) {
  io::PipelineConfig cfg = load_config_or_default(config_path, checkpoint_path);
  const img::GridHierarchy grid = cfg.grid();
  LoadedScene loaded = load_scene_dir(frames_dir, cfg.grid_width, cfg.grid_height);

  num::ParamSet params;
  gnn::VertexDescriptorSet descriptors;
  if (!oracle) {
    if (checkpoint_path.empty() || cache_path.empty())
      throw ConfigError("localize: learned mode needs --checkpoint and --cache");
    params = num::load_checkpoint<double>(checkpoint_path);
    descriptors.descriptors = io::read_descriptor_cache(
        cache_path, num::hash_file((fs::path(frames_dir) / "mesh.ply").string()),
        num::hash_file(checkpoint_path));
    descriptors.split = cfg.gnn.split;
    descriptors.offsets.resize(descriptors.split.size());
    int off = 0;
    for (std::size_t l = 0; l < descriptors.split.size(); ++l) {
      descriptors.offsets[l] = off;
      off += descriptors.split[l];
    }
  }

  synth::SceneBundle bundle =
      synth::SceneBundle::build(loaded.mesh, loaded.meta.intrinsics, std::move(descriptors));
  synth::LocalizeParams lp;
  lp.routing = cfg.routing;
  lp.solver = cfg.solver;
  lp.occlusion = cfg.train.occlusion;
  lp.depth_sampling = cfg.depth_sampling;
  lp.icp_fine_gate = cfg.icp_fine_gate;
  lp.depth_max_range = cfg.train.depth_max_range;

  const std::size_t n = loaded.meta.frames.size();
  std::vector<io::PoseEstimate> estimates(n);
  std::vector<synth::LocalizeResult> results(n);
  std::mutex io_mutex;
  parallel_for(static_cast<long>(n), [&](long k) {
    scene::FrameRecord frame;
    {
      // image decoding shares no state but keeps the log tidy under a lock
      std::lock_guard<std::mutex> lock(io_mutex);
      frame = loaded.frame(static_cast<std::size_t>(k), cfg.grid_width, cfg.grid_height);
    }
    num::ParamSet local = params;  // batch-norm buffers stay frame-local
    results[static_cast<std::size_t>(k)] =
        run_localize(bundle, frame, local, grid, cfg.cnn, lp,
                     oracle ? synth::LocalizeMode::OracleEmbedding
                            : synth::LocalizeMode::Learned);
    estimates[static_cast<std::size_t>(k)] = {loaded.meta.frames[static_cast<std::size_t>(k)].id,
                                              results[static_cast<std::size_t>(k)].pose};
  });

  io::write_pose_estimates(poses_out, estimates);
  int nan = 0;
  for (const auto& e : estimates) nan += e.pose ? 0 : 1;
  std::cout << "localized " << n << " frames (" << nan << " without a prediction) -> "
            << poses_out << "\n";
  return 0;
}

int run_evaluate(const std::string& poses_path, const std::string& gt_dir,
                 const std::string& report_path, const std::string& method) {
  LoadedScene loaded = load_scene_dir(gt_dir, 512, 288);
  const auto estimates = io::read_pose_estimates(poses_path);
  auto [normalized, norm] = scene::normalize_mesh(loaded.mesh);
  (void)normalized;

  std::map<int, std::size_t> frame_index;
  for (std::size_t k = 0; k < loaded.meta.frames.size(); ++k)
    frame_index[loaded.meta.frames[k].id] = k;

  std::vector<pose::FrameMetrics> metrics(estimates.size());
  parallel_for(static_cast<long>(estimates.size()), [&](long i) {
    const auto& est = estimates[static_cast<std::size_t>(i)];
    auto it = frame_index.find(est.frame_id);
    if (it == frame_index.end())
      throw DataError("evaluate: estimate for unknown frame id " + std::to_string(est.frame_id));
    pose::FrameMetrics& m = metrics[static_cast<std::size_t>(i)];
    if (!est.pose) return;  // NaN frame
    const scene::RigidTransform gt = loaded.gt_poses[it->second];
    m.has_pose = true;
    const auto [te, re] = pose::pose_error(*est.pose, gt);
    m.translation_error = te;
    m.rotation_error_deg = re;
    const scene::FrameRecord frame = loaded.frame(it->second, 512, 288);
    const auto dcre = pose::dcre_of_frame(frame.depth, loaded.meta.intrinsics, *est.pose, gt);
    m.dcre_valid = dcre.has_value();
    if (dcre) m.dcre = *dcre;
  });

  const pose::BenchmarkRecord record = pose::aggregate_metrics(metrics, 0.05 * norm.scale);
  io::write_metrics_report(report_path, {{method, record}});
  std::cout << "Score " << record.score << "  DCRE(0.05) " << record.dcre_005 << "  DCRE(0.15) "
            << record.dcre_015 << "  Pose(0.05m,5deg) " << record.pose_005_5deg << "  Outlier(0.5) "
            << record.outlier_05 << "  NaN " << record.nan_rate << "\n";
  return 0;
}

int run_report(const std::string& metrics_path, const std::string& plot_out,
               const std::string& train_log) {
  const auto rows = io::read_metrics_report(metrics_path);
  if (rows.empty()) throw DataError(metrics_path + ": empty metrics report");
  std::vector<std::string> labels = {"Score", "DCRE(0.05)", "DCRE(0.15)", "Pose", "Outlier",
                                     "NaN"};
  const auto& r = rows[0].record;
  io::write_ppm(plot_out,
                io::render_bar_chart(labels,
                                     {r.score, r.dcre_005, r.dcre_015, r.pose_005_5deg,
                                      r.outlier_05, r.nan_rate},
                                     "Benchmark: " + rows[0].method));
  std::cout << "plot written to " << plot_out << "\n";

  if (!train_log.empty()) {
    std::ifstream is(train_log);
    if (!is) throw DataError(train_log + ": cannot open");
    std::string line;
    std::getline(is, line);  // header
    io::Series total{"total", {}, {0.8, 0.3, 0.2}};
    io::Series conf{"confidence", {}, {0.2, 0.4, 0.8}};
    io::Series sim{"similarity", {}, {0.2, 0.6, 0.3}};
    while (std::getline(is, line)) {
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream ls(line);
      double stage, epoch, t, c, s;
      if (ls >> stage >> epoch >> t >> c >> s) {
        total.values.push_back(t);
        conf.values.push_back(c);
        sim.values.push_back(s);
      }
    }
    const fs::path base(plot_out);
    const std::string loss_plot =
        (base.parent_path() / (base.stem().string() + "_loss.ppm")).string();
    io::write_ppm(loss_plot, io::render_line_chart({total, conf, sim}, "Training loss"));
    std::cout << "plot written to " << loss_plot << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meshloc: mesh-based camera relocalization pipeline"};
  app.require_subcommand(1);

  // generate-scene
  auto* gen = app.add_subcommand("generate-scene", "Write a synthetic scene directory");
  std::uint64_t seed = 1;
  std::string out_dir;
  int gen_frames = 0;
  synth::SceneParams scene_params;
  gen->add_option("--seed", seed, "Scene seed");
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--frames", gen_frames, "Number of frames (default: trajectory length)");
  gen->add_option("--objects", scene_params.object_count, "Object count");
  gen->add_option("--dynamic-fraction", scene_params.dynamic_fraction, "Dynamic object fraction");
  gen->add_option("--subdivision", scene_params.subdivision, "Surface subdivision edge length");
  gen->add_option("--configurations", scene_params.configuration_count, "Scene configurations");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the correspondence model");
  std::string config_path, checkpoint_path, log_path;
  std::vector<std::string> scene_dirs;
  train_cmd->add_option("--config", config_path, "Pipeline config JSON");
  train_cmd->add_option("--scene-dir", scene_dirs, "Scene directories")->required();
  train_cmd->add_option("--checkpoint", checkpoint_path, "Output checkpoint")->required();
  train_cmd->add_option("--log", log_path, "Training log CSV (default: <checkpoint>.log.csv)");

  // embed-mesh
  auto* embed = app.add_subcommand("embed-mesh", "Cache vertex descriptors for a mesh");
  std::string mesh_path, cache_path, embed_config;
  std::string embed_checkpoint;
  embed->add_option("--checkpoint", embed_checkpoint, "Checkpoint")->required();
  embed->add_option("--mesh", mesh_path, "Mesh file")->required();
  embed->add_option("--cache", cache_path, "Output cache file")->required();
  embed->add_option("--config", embed_config, "Pipeline config JSON");

  // localize
  auto* loc = app.add_subcommand("localize", "Estimate poses for every frame of a scene");
  std::string loc_checkpoint, loc_cache, frames_dir, poses_out, loc_config;
  bool oracle = false;
  loc->add_option("--checkpoint", loc_checkpoint, "Checkpoint (learned mode)");
  loc->add_option("--cache", loc_cache, "Descriptor cache (learned mode)");
  loc->add_option("--frames", frames_dir, "Scene directory with frames")->required();
  loc->add_option("--poses-out", poses_out, "Output estimates file")->required();
  loc->add_flag("--oracle", oracle, "Oracle-embedding mode (geometry only)");
  loc->add_option("--config", loc_config, "Pipeline config JSON");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Score estimates against ground truth");
  std::string eval_poses, eval_gt, eval_report, eval_method = "meshloc";
  eval->add_option("--poses", eval_poses, "Estimates file")->required();
  eval->add_option("--ground-truth", eval_gt, "Scene directory with poses_gt.txt")->required();
  eval->add_option("--report", eval_report, "Output metrics report")->required();
  eval->add_option("--method", eval_method, "Method name for the report row");

  // report
  auto* rep = app.add_subcommand("report", "Render plots from a metrics report");
  std::string rep_metrics, rep_plot, rep_train_log;
  rep->add_option("--metrics", rep_metrics, "Metrics report file")->required();
  rep->add_option("--plot-out", rep_plot, "Output plot image (PPM)")->required();
  rep->add_option("--train-log", rep_train_log, "Optional training log CSV to plot");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return run_generate_scene(seed, out_dir, gen_frames, scene_params);
    if (train_cmd->parsed()) return run_train(config_path, scene_dirs, checkpoint_path, log_path);
    if (embed->parsed()) return run_embed_mesh(embed_checkpoint, mesh_path, cache_path, embed_config);
    if (loc->parsed())
      return run_localize(loc_checkpoint, loc_cache, frames_dir, poses_out, oracle, loc_config);
    if (eval->parsed()) return run_evaluate(eval_poses, eval_gt, eval_report, eval_method);
    if (rep->parsed()) return run_report(rep_metrics, rep_plot, rep_train_log);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are config errors
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
