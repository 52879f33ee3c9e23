#include "meshloc/io/pipeline_config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

#include "meshloc/common/errors.hpp"

namespace meshloc::io {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void PipelineConfig::validate() const {
  gnn.validate();
  cnn.validate();
  if (gnn.split != cnn.head_widths)
    throw ConfigError(
        "pipeline config: the vertex subvector split must equal the CNN head widths");
  if (static_cast<int>(gnn.split.size()) != grid_levels)
    throw ConfigError("pipeline config: one subvector per grid level required");
  if (static_cast<int>(routing.beams.size()) != grid_levels - 1)
    throw ConfigError("pipeline config: routing needs one beam per decision level");
  if (static_cast<int>(train.routing.beams.size()) != grid_levels - 1)
    throw ConfigError("pipeline config: training routing needs one beam per decision level");
  train.weights.validate(grid_levels);
  if (train.stages.empty()) throw ConfigError("pipeline config: at least one training stage");
  grid();  // divisibility
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(path + ": cannot open config file");
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }

  PipelineConfig cfg;
  try {
    check_keys(j, {"grid", "gnn", "cnn", "match", "depth_sampling", "icp_fine_gate", "solver",
                   "train"},
               path);
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      check_keys(g, {"width", "height", "levels"}, "grid");
      get_if(g, "width", cfg.grid_width);
      get_if(g, "height", cfg.grid_height);
      get_if(g, "levels", cfg.grid_levels);
    }
    if (j.contains("gnn")) {
      const auto& g = j["gnn"];
      check_keys(g, {"stem_width", "blocks", "split", "attention", "attention_slope", "mask"},
                 "gnn");
      get_if(g, "stem_width", cfg.gnn.stem_width);
      if (g.contains("blocks")) {
        cfg.gnn.blocks.clear();
        for (const auto& b : g["blocks"]) {
          check_keys(b, {"heads", "width"}, "gnn.blocks[]");
          cfg.gnn.blocks.push_back({b.at("heads").get<int>(), b.at("width").get<int>()});
        }
      }
      if (g.contains("split")) cfg.gnn.split = g["split"].get<std::vector<int>>();
      if (g.contains("attention")) {
        const auto mode = g["attention"].get<std::string>();
        if (mode == "gat")
          cfg.gnn.attention = gnn::AttentionMode::Gat;
        else if (mode == "gcn-uniform")
          cfg.gnn.attention = gnn::AttentionMode::GcnUniform;
        else
          throw ConfigError("gnn.attention must be 'gat' or 'gcn-uniform', got '" + mode + "'");
      }
      get_if(g, "attention_slope", cfg.gnn.attention_slope);
      if (g.contains("mask")) {
        const auto& m = g["mask"];
        check_keys(m, {"position", "normal", "color", "semantic"}, "gnn.mask");
        get_if(m, "position", cfg.gnn.mask.position);
        get_if(m, "normal", cfg.gnn.mask.normal);
        get_if(m, "color", cfg.gnn.mask.color);
        get_if(m, "semantic", cfg.gnn.mask.semantic);
      }
    }
    if (j.contains("cnn")) {
      const auto& c = j["cnn"];
      check_keys(c, {"initial_filters", "set_reps", "head_widths", "leaky_slope", "bn_momentum",
                     "bn_eps"},
                 "cnn");
      get_if(c, "initial_filters", cfg.cnn.initial_filters);
      if (c.contains("set_reps")) cfg.cnn.set_reps = c["set_reps"].get<std::vector<int>>();
      if (c.contains("head_widths")) cfg.cnn.head_widths = c["head_widths"].get<std::vector<int>>();
      get_if(c, "leaky_slope", cfg.cnn.leaky_slope);
      get_if(c, "bn_momentum", cfg.cnn.bn_momentum);
      get_if(c, "bn_eps", cfg.cnn.bn_eps);
    }
    if (j.contains("match")) {
      const auto& m = j["match"];
      check_keys(m, {"beams", "confidence_threshold"}, "match");
      if (m.contains("beams")) cfg.routing.beams = m["beams"].get<std::vector<int>>();
      get_if(m, "confidence_threshold", cfg.routing.confidence_threshold);
    }
    if (j.contains("depth_sampling")) {
      const auto& d = j["depth_sampling"];
      check_keys(d, {"subpixel", "edge_tolerance"}, "depth_sampling");
      get_if(d, "subpixel", cfg.depth_sampling.subpixel);
      get_if(d, "edge_tolerance", cfg.depth_sampling.edge_tolerance);
    }
    get_if(j, "icp_fine_gate", cfg.icp_fine_gate);
    if (j.contains("solver")) {
      const auto& s = j["solver"];
      check_keys(s, {"iterations", "far_min", "rigid_tol", "score_eps", "icp_max_iterations",
                     "icp_rel_tol", "icp_gate", "seed"},
                 "solver");
      get_if(s, "iterations", cfg.solver.iterations);
      get_if(s, "far_min", cfg.solver.far_min);
      get_if(s, "rigid_tol", cfg.solver.rigid_tol);
      get_if(s, "score_eps", cfg.solver.score_eps);
      get_if(s, "icp_max_iterations", cfg.solver.icp_max_iterations);
      get_if(s, "icp_rel_tol", cfg.solver.icp_rel_tol);
      get_if(s, "icp_gate", cfg.solver.icp_gate);
      get_if(s, "seed", cfg.solver.seed);
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      check_keys(t, {"stages", "weights", "routing", "augment", "occlusion", "depth_max_range",
                     "seed"},
                 "train");
      if (t.contains("stages")) {
        cfg.train.stages.clear();
        for (const auto& s : t["stages"]) {
          check_keys(s, {"epochs", "learning_rate", "image_augment", "mesh_augment"},
                     "train.stages[]");
          train::StageConfig stage;
          get_if(s, "epochs", stage.epochs);
          get_if(s, "learning_rate", stage.learning_rate);
          get_if(s, "image_augment", stage.image_augment);
          get_if(s, "mesh_augment", stage.mesh_augment);
          cfg.train.stages.push_back(stage);
        }
      }
      if (t.contains("weights")) {
        const auto& w = t["weights"];
        check_keys(w, {"lambda_s", "lambda_o", "lambda_n", "margins"}, "train.weights");
        get_if(w, "lambda_s", cfg.train.weights.lambda_s);
        get_if(w, "lambda_o", cfg.train.weights.lambda_o);
        get_if(w, "lambda_n", cfg.train.weights.lambda_n);
        if (w.contains("margins"))
          cfg.train.weights.margins = w["margins"].get<std::vector<double>>();
      }
      if (t.contains("routing")) {
        const auto& r = t["routing"];
        check_keys(r, {"beams", "confidence_threshold"}, "train.routing");
        if (r.contains("beams")) cfg.train.routing.beams = r["beams"].get<std::vector<int>>();
        get_if(r, "confidence_threshold", cfg.train.routing.confidence_threshold);
      }
      if (t.contains("augment")) {
        const auto& a = t["augment"];
        check_keys(a, {"blur_sigma_max", "noise_sigma_max", "contrast_delta", "brightness_delta",
                       "rot_z_deg", "rot_xy_deg"},
                   "train.augment");
        get_if(a, "blur_sigma_max", cfg.train.augment.blur_sigma_max);
        get_if(a, "noise_sigma_max", cfg.train.augment.noise_sigma_max);
        get_if(a, "contrast_delta", cfg.train.augment.contrast_delta);
        get_if(a, "brightness_delta", cfg.train.augment.brightness_delta);
        get_if(a, "rot_z_deg", cfg.train.augment.rot_z_deg);
        get_if(a, "rot_xy_deg", cfg.train.augment.rot_xy_deg);
      }
      if (t.contains("occlusion")) {
        const auto& o = t["occlusion"];
        check_keys(o, {"relative", "absolute"}, "train.occlusion");
        get_if(o, "relative", cfg.train.occlusion.relative);
        get_if(o, "absolute", cfg.train.occlusion.absolute);
      }
      get_if(t, "depth_max_range", cfg.train.depth_max_range);
      get_if(t, "seed", cfg.train.seed);
    }
  } catch (const json::exception& e) {
    throw ConfigError(path + ": malformed config value: " + e.what());
  }
  cfg.validate();
  return cfg;
}

void write_pipeline_config(const std::string& path, const PipelineConfig& cfg) {
  json j;
  j["grid"] = {{"width", cfg.grid_width}, {"height", cfg.grid_height}, {"levels", cfg.grid_levels}};
  j["gnn"]["stem_width"] = cfg.gnn.stem_width;
  j["gnn"]["blocks"] = json::array();
  for (const auto& b : cfg.gnn.blocks)
    j["gnn"]["blocks"].push_back({{"heads", b.heads}, {"width", b.output_width}});
  j["gnn"]["split"] = cfg.gnn.split;
  j["gnn"]["attention"] = cfg.gnn.attention == gnn::AttentionMode::Gat ? "gat" : "gcn-uniform";
  j["gnn"]["attention_slope"] = cfg.gnn.attention_slope;
  j["gnn"]["mask"] = {{"position", cfg.gnn.mask.position}, {"normal", cfg.gnn.mask.normal},
                      {"color", cfg.gnn.mask.color}, {"semantic", cfg.gnn.mask.semantic}};
  j["cnn"] = {{"initial_filters", cfg.cnn.initial_filters}, {"set_reps", cfg.cnn.set_reps},
              {"head_widths", cfg.cnn.head_widths}, {"leaky_slope", cfg.cnn.leaky_slope},
              {"bn_momentum", cfg.cnn.bn_momentum}, {"bn_eps", cfg.cnn.bn_eps}};
  j["match"] = {{"beams", cfg.routing.beams},
                {"confidence_threshold", cfg.routing.confidence_threshold}};
  j["depth_sampling"] = {{"subpixel", cfg.depth_sampling.subpixel},
                         {"edge_tolerance", cfg.depth_sampling.edge_tolerance}};
  j["icp_fine_gate"] = cfg.icp_fine_gate;
  j["solver"] = {{"iterations", cfg.solver.iterations}, {"far_min", cfg.solver.far_min},
                 {"rigid_tol", cfg.solver.rigid_tol}, {"score_eps", cfg.solver.score_eps},
                 {"icp_max_iterations", cfg.solver.icp_max_iterations},
                 {"icp_rel_tol", cfg.solver.icp_rel_tol}, {"icp_gate", cfg.solver.icp_gate},
                 {"seed", cfg.solver.seed}};
  j["train"]["stages"] = json::array();
  for (const auto& s : cfg.train.stages)
    j["train"]["stages"].push_back({{"epochs", s.epochs}, {"learning_rate", s.learning_rate},
                                    {"image_augment", s.image_augment},
                                    {"mesh_augment", s.mesh_augment}});
  j["train"]["weights"] = {{"lambda_s", cfg.train.weights.lambda_s},
                           {"lambda_o", cfg.train.weights.lambda_o},
                           {"lambda_n", cfg.train.weights.lambda_n},
                           {"margins", cfg.train.weights.margins}};
  j["train"]["routing"] = {{"beams", cfg.train.routing.beams},
                           {"confidence_threshold", cfg.train.routing.confidence_threshold}};
  j["train"]["augment"] = {{"blur_sigma_max", cfg.train.augment.blur_sigma_max},
                           {"noise_sigma_max", cfg.train.augment.noise_sigma_max},
                           {"contrast_delta", cfg.train.augment.contrast_delta},
                           {"brightness_delta", cfg.train.augment.brightness_delta},
                           {"rot_z_deg", cfg.train.augment.rot_z_deg},
                           {"rot_xy_deg", cfg.train.augment.rot_xy_deg}};
  j["train"]["occlusion"] = {{"relative", cfg.train.occlusion.relative},
                             {"absolute", cfg.train.occlusion.absolute}};
  j["train"]["depth_max_range"] = cfg.train.depth_max_range;
  j["train"]["seed"] = cfg.train.seed;
  std::ofstream os(path);
  if (!os) throw DataError(path + ": cannot open for writing");
  os << j.dump(2) << "\n";
}

}  // namespace meshloc::io
