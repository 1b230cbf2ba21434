#include <lodom/run_config.hpp>

#include <set>

#include <lodom/error.hpp>

#include "json_util.hpp"

namespace lodom {

namespace {

using namespace detail;

// Each visitor lists the JSON name of every tunable field once; parsing and printing share it.
template <typename F>
void visit_fields(RegistrationParams& p, F&& f) {
  f("max_iterations", p.max_iterations);
  f("transform_epsilon", p.transform_epsilon);
  f("max_correspondence_distance", p.max_correspondence_distance);
  f("voxel_resolution", p.voxel_resolution);
  f("covariance_k", p.covariance_k);
  f("cov_regularization", p.cov_regularization);
  f("min_points_per_cell", p.min_points_per_cell);
}

template <typename F>
void visit_fields(FeatureParams& p, F&& f) {
  f("subregions_per_ring", p.subregions_per_ring);
  f("edge_threshold", p.edge_threshold);
  f("edges_per_subregion", p.edges_per_subregion);
  f("planars_per_subregion", p.planars_per_subregion);
  f("neighborhood_half_width", p.neighborhood_half_width);
  f("mapping_edge_multiplier", p.mapping_edge_multiplier);
  f("outlier_rejection", p.outlier_rejection);
  f("occlusion_gap", p.occlusion_gap);
  f("parallel_beam_ratio", p.parallel_beam_ratio);
  f("weight_scale", p.weight_scale);
  f("unweighted_iterations", p.unweighted_iterations);
  f("correspondence_distance", p.correspondence_distance);
  f("ring_search_window", p.ring_search_window);
  f("max_iterations", p.max_iterations);
  f("transform_epsilon", p.transform_epsilon);
  f("edge_map_cell", p.edge_map_cell);
  f("planar_map_cell", p.planar_map_cell);
  f("map_neighbors", p.map_neighbors);
  f("map_neighbor_distance", p.map_neighbor_distance);
  f("line_eigen_ratio", p.line_eigen_ratio);
  f("plane_fit_tolerance", p.plane_fit_tolerance);
}

template <typename F>
void visit_fields(GroundParams& p, F&& f) {
  f("ground_angle_deg", p.ground_angle_deg);
  f("cluster_angle_deg", p.cluster_angle_deg);
  f("min_cluster_size", p.min_cluster_size);
  f("min_line_cluster_size", p.min_line_cluster_size);
  f("min_cluster_rows", p.min_cluster_rows);
}

template <typename S>
void read_section(const json& parent, const char* key, S& s) {
  if (!parent.contains(key)) {
    return;
  }
  const json& j = parent.at(key);
  if (!j.is_object()) {
    throw Error(ErrorCode::schema_error, std::string(key) + " must be an object");
  }
  std::set<std::string> known;
  visit_fields(s, [&](const char* name, auto&) { known.insert(name); });
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) {
      throw Error(ErrorCode::schema_error, std::string(key) + ": unknown key '" + k + "'");
    }
  }
  visit_fields(s, [&](const char* name, auto& field) {
    field = get_or<std::remove_reference_t<decltype(field)>>(j, name, field);
  });
}

template <typename S>
json section_json(S s) {
  json j = json::object();
  visit_fields(s, [&](const char* name, auto& field) { j[name] = field; });
  return j;
}

std::vector<std::filesystem::path> path_list(const json& j, const char* key, const std::filesystem::path& base) {
  std::vector<std::filesystem::path> out;
  if (!j.contains(key)) {
    return out;
  }
  if (!j.at(key).is_array()) {
    throw Error(ErrorCode::schema_error, std::string(key) + " must be an array of paths");
  }
  for (const auto& e : j.at(key)) {
    if (!e.is_string()) {
      throw Error(ErrorCode::schema_error, std::string(key) + " must be an array of paths");
    }
    out.push_back(base / e.get<std::string>());
  }
  return out;
}

RunSpec parse_run(const json& j, const SensorModel& sensor) {
  check_keys(j, {"name", "method", "initial_guess", "mapping", "downsample_cell", "frame_period", "registration",
                 "features", "ground"},
             "run");
  RunSpec r;
  r.name = get_or<std::string>(j, "name", "");
  if (r.name.empty()) {
    throw Error(ErrorCode::schema_error, "every run needs a non-empty name");
  }
  if (!j.contains("method")) {
    throw Error(ErrorCode::schema_error, "run '" + r.name + "' has no method");
  }
  OdometryConfig& o = r.odometry;
  try {
    o.method = method_from_name(get_or<std::string>(j, "method", ""));
    o.initial_guess = initial_guess_from_name(get_or<std::string>(j, "initial_guess", "constant_velocity"));
  } catch (const Error& e) {
    throw Error(ErrorCode::schema_error, "run '" + r.name + "': " + e.what());
  }
  o.mapping_enabled = get_or<bool>(j, "mapping", false);
  o.downsample_cell = get_or<double>(j, "downsample_cell", 0.0);
  o.frame_period = get_or<double>(j, "frame_period", o.frame_period);
  read_section(j, "registration", o.registration);
  read_section(j, "features", o.features);
  read_section(j, "ground", o.ground);
  if (is_feature_method(o.method) && j.contains("registration")) {
    throw Error(ErrorCode::schema_error, "run '" + r.name + "': registration params given to a feature method");
  }
  if (!is_feature_method(o.method) && (j.contains("features") || j.contains("ground"))) {
    throw Error(ErrorCode::schema_error, "run '" + r.name + "': feature params given to a point-wise method");
  }
  o.sensor = sensor;
  try {
    o.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::schema_error, "run '" + r.name + "': " + e.what());
  }
  return r;
}

DatasetInput parse_dataset(const json& j, const std::filesystem::path& base) {
  check_keys(j, {"clouds", "format", "ground_truth", "labels", "skymasks", "sensor"}, "dataset");
  DatasetInput d;
  d.clouds = path_list(j, "clouds", base);
  if (d.clouds.empty()) {
    throw Error(ErrorCode::schema_error, "dataset.clouds must list at least one cloud");
  }
  try {
    d.format = cloud_format_from_name(get_or<std::string>(j, "format", "native"));
  } catch (const Error& e) {
    throw Error(ErrorCode::schema_error, e.what());
  }
  if (j.contains("ground_truth")) {
    d.ground_truth = base / get_or<std::string>(j, "ground_truth", "");
  }
  d.labels = path_list(j, "labels", base);
  d.skymasks = path_list(j, "skymasks", base);
  if (!d.labels.empty() && d.labels.size() != d.clouds.size()) {
    throw Error(ErrorCode::schema_error, "dataset.labels needs one file per cloud");
  }
  if (!d.skymasks.empty() && d.skymasks.size() != d.clouds.size()) {
    throw Error(ErrorCode::schema_error, "dataset.skymasks needs one file per cloud");
  }
  if (j.contains("sensor")) {
    d.sensor = parse_sensor(j.at("sensor").dump());
  }
  return d;
}

RunConfig parse_config(const json& j, const std::filesystem::path& base) {
  check_keys(j, {"runs", "input", "output_dir", "seed", "evaluation", "synthetic_skymasks"}, "config");
  RunConfig c;
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  c.output_dir = base / get_or<std::string>(j, "output_dir", "lodom_out");
  c.synthetic_skymasks = get_or<bool>(j, "synthetic_skymasks", true);

  if (!j.contains("input")) {
    throw Error(ErrorCode::schema_error, "config needs an input");
  }
  const json& in = j.at("input");
  check_keys(in, {"synthetic", "dataset"}, "input");
  if (in.contains("synthetic") == in.contains("dataset")) {
    throw Error(ErrorCode::schema_error, "input must hold exactly one of 'synthetic' and 'dataset'");
  }
  SensorModel sensor;
  if (in.contains("synthetic")) {
    ScenarioSpec s = parse_scenario(in.at("synthetic").dump());
    s.seed = c.seed;
    sensor = s.sensor;
    c.synthetic = std::move(s);
  } else {
    c.dataset = parse_dataset(in.at("dataset"), base);
    sensor = c.dataset->sensor;
  }

  if (j.contains("evaluation")) {
    const json& e = j.at("evaluation");
    check_keys(e, {"delta", "tolerance", "rotation_weight"}, "evaluation");
    c.evaluation.delta = get_or<int>(e, "delta", 1);
    c.evaluation.tolerance = get_or<double>(e, "tolerance", 1e-3);
    c.evaluation.rotation_weight = get_or<double>(e, "rotation_weight", 1.0);
    if (c.evaluation.delta < 1 || !(c.evaluation.tolerance > 0.0) || !(c.evaluation.rotation_weight >= 0.0)) {
      throw Error(ErrorCode::schema_error, "evaluation: delta >= 1, tolerance > 0, rotation_weight >= 0 required");
    }
  }

  if (!j.contains("runs") || !j.at("runs").is_array() || j.at("runs").empty()) {
    throw Error(ErrorCode::schema_error, "config needs a non-empty 'runs' array");
  }
  std::set<std::string> names;
  for (const auto& rj : j.at("runs")) {
    RunSpec r = parse_run(rj, sensor);
    if (!names.insert(r.name).second) {
      throw Error(ErrorCode::schema_error, "duplicate run name '" + r.name + "'");
    }
    c.runs.push_back(std::move(r));
  }
  return c;
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  try {
    return parse_config(parse_json(text), base_dir);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::schema_error, std::string("config: ") + e.what());
  }
}

RunConfig read_run_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_run_config(text, path.parent_path());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string run_config_to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["synthetic_skymasks"] = c.synthetic_skymasks;
  j["evaluation"] = {{"delta", c.evaluation.delta},
                     {"tolerance", c.evaluation.tolerance},
                     {"rotation_weight", c.evaluation.rotation_weight}};
  if (c.synthetic) {
    j["input"]["synthetic"] = json::parse(scenario_to_json(*c.synthetic));
  } else if (c.dataset) {
    json d;
    d["format"] = std::string(cloud_format_name(c.dataset->format));
    d["clouds"] = json::array();
    for (const auto& p : c.dataset->clouds) d["clouds"].push_back(p.filename().string());
    j["input"]["dataset"] = d;
  }
  j["runs"] = json::array();
  for (const auto& r : c.runs) {
    json rj;
    rj["name"] = r.name;
    rj["method"] = std::string(method_name(r.odometry.method));
    rj["initial_guess"] = std::string(initial_guess_name(r.odometry.initial_guess));
    rj["mapping"] = r.odometry.mapping_enabled;
    rj["downsample_cell"] = r.odometry.downsample_cell;
    rj["frame_period"] = r.odometry.frame_period;
    if (is_feature_method(r.odometry.method)) {
      rj["features"] = section_json(r.odometry.features);
      if (r.odometry.method == Method::lego) {
        rj["ground"] = section_json(r.odometry.ground);
      }
    } else {
      rj["registration"] = section_json(r.odometry.registration);
    }
    j["runs"].push_back(rj);
  }
  return j.dump(2);
}

}  // namespace lodom
