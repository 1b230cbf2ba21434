#include <lodom/odometry.hpp>

#include <algorithm>
#include <chrono>
#include <optional>
#include <unordered_set>

#include <lodom/dataio.hpp>
#include <lodom/error.hpp>
#include <lodom/voxel_grid.hpp>

namespace lodom {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

/// What the next frame registers against.
struct Reference {
  PointCloud cloud;
  /// G-ICP / VGICP only: built once per frame, used as source and then as target.
  std::optional<GaussianCloud> gaussian;
  FeatureSet features;
  LegoFrame lego;
};

Reference prepare(const PointCloud& scan, const OdometryConfig& cfg) {
  Reference r;
  switch (cfg.method) {
    case Method::loam: r.features = extract_features(scan, cfg.features); break;
    case Method::lego: r.lego = extract_lego_features(scan, cfg.sensor, cfg.features, cfg.ground); break;
    default: r.cloud = cfg.downsample_cell > 0.0 ? downsample_first(scan, cfg.downsample_cell) : scan; break;
  }
  if ((cfg.method == Method::gicp || cfg.method == Method::vgicp) &&
      r.cloud.size() >= static_cast<std::size_t>(cfg.registration.covariance_k)) {
    r.gaussian = prepare_gaussian_cloud(r.cloud, cfg.registration);
  }
  return r;
}

RegistrationResult register_pair(const Reference& curr, const Reference& prev, const Pose& init,
                                 const OdometryConfig& cfg) {
  if ((cfg.method == Method::gicp || cfg.method == Method::vgicp) && (!curr.gaussian || !prev.gaussian)) {
    throw Error(ErrorCode::insufficient_points, std::string(method_name(cfg.method)) +
                                                    " needs at least covariance_k points in each cloud");
  }
  switch (cfg.method) {
    case Method::icp: return icp_align(curr.cloud, prev.cloud, init, cfg.registration);
    case Method::gicp: return gicp_align(*curr.gaussian, *prev.gaussian, init, cfg.registration);
    case Method::vgicp: return vgicp_align(*curr.gaussian, *prev.gaussian, init, cfg.registration);
    case Method::ndt: return ndt_align(curr.cloud, prev.cloud, init, cfg.registration);
    case Method::loam: return feature_odometry(curr.features, prev.features, init, cfg.features);
    case Method::lego: return lego_two_stage(curr.lego, prev.lego, init, cfg.features).registration;
  }
  throw Error(ErrorCode::invalid_argument, "unknown method");
}

const FeatureSet& features_of(const Reference& r, Method m) { return m == Method::lego ? r.lego.features : r.features; }

bool finite_pose(const Pose& T) { return T.rotation.allFinite() && T.translation.allFinite(); }

}  // namespace

Method method_from_name(std::string_view name) {
  if (name == "icp") return Method::icp;
  if (name == "gicp") return Method::gicp;
  if (name == "vgicp") return Method::vgicp;
  if (name == "ndt") return Method::ndt;
  if (name == "loam") return Method::loam;
  if (name == "lego") return Method::lego;
  throw Error(ErrorCode::invalid_argument, "unknown method '" + std::string(name) + "'");
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::icp: return "icp";
    case Method::gicp: return "gicp";
    case Method::vgicp: return "vgicp";
    case Method::ndt: return "ndt";
    case Method::loam: return "loam";
    case Method::lego: return "lego";
  }
  return "icp";
}

bool is_feature_method(Method m) { return m == Method::loam || m == Method::lego; }

InitialGuess initial_guess_from_name(std::string_view name) {
  if (name == "identity") return InitialGuess::identity;
  if (name == "constant_velocity") return InitialGuess::constant_velocity;
  throw Error(ErrorCode::invalid_argument, "unknown initial guess policy '" + std::string(name) + "'");
}

std::string_view initial_guess_name(InitialGuess g) {
  return g == InitialGuess::identity ? "identity" : "constant_velocity";
}

void OdometryConfig::validate() const {
  if (mapping_enabled && !is_feature_method(method)) {
    throw Error(ErrorCode::invalid_argument, "mapping is only available for feature methods");
  }
  if (downsample_cell < 0.0) {
    throw Error(ErrorCode::invalid_argument, "downsample_cell must be non-negative");
  }
  if (!(frame_period > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "frame_period must be positive");
  }
  if (is_feature_method(method)) {
    features.validate();
  } else {
    registration.validate();
  }
  if (method == Method::lego) {
    sensor.validate();
  }
}

std::size_t OdometryRun::diverged_count() const {
  return static_cast<std::size_t>(
      std::count_if(frames.begin(), frames.end(), [](const FrameResult& f) { return f.diagnostics.diverged; }));
}

Trajectory OdometryRun::trajectory() const {
  Trajectory t;
  t.reserve(frames.size());
  for (const auto& f : frames) {
    t.push_back({f.timestamp, f.pose_world});
  }
  return t;
}

PointCloud downsample_first(const PointCloud& c, double cell) {
  if (!(cell > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "cell size must be positive");
  }
  PointCloud out;
  out.frame_id = c.frame_id;
  out.timestamp = c.timestamp;
  std::unordered_set<CellKey, CellKeyHash> seen;
  for (const auto& p : c.points) {
    if (seen.insert(cell_key(p.xyz, cell)).second) {
      out.points.push_back(p);
    }
  }
  return out;
}

OdometryRun run_odometry(std::span<const PointCloud> scans, const OdometryConfig& cfg) {
  if (scans.empty()) {
    throw Error(ErrorCode::empty_input, "odometry needs at least one scan");
  }
  cfg.validate();

  bool stamped = true;
  for (std::size_t k = 1; k < scans.size(); ++k) {
    stamped = stamped && scans[k].timestamp > scans[k - 1].timestamp;
  }
  auto stamp = [&](std::size_t k) { return stamped ? scans[k].timestamp : static_cast<double>(k) * cfg.frame_period; };

  OdometryRun run;
  run.frames.reserve(scans.size());
  const bool mapping = cfg.mapping_enabled;
  FeatureMap map(cfg.features.edge_map_cell, cfg.features.planar_map_cell);

  FrameResult first;
  first.timestamp = stamp(0);
  auto t0 = Clock::now();
  Reference prev = prepare(scans[0], cfg);
  first.odometry_ms = elapsed_ms(t0);
  first.diagnostics.converged = true;
  if (mapping) {
    t0 = Clock::now();
    MappingResult m = feature_mapping(features_of(prev, cfg.method), std::move(map), Pose::identity(), cfg.features);
    map = std::move(m.map);
    first.mapping_ms = elapsed_ms(t0);
    first.diagnostics.mapped = true;
  }
  run.frames.push_back(first);

  Pose motion = Pose::identity();
  for (std::size_t k = 1; k < scans.size(); ++k) {
    FrameResult f;
    f.frame_index = k;
    f.timestamp = stamp(k);
    const Pose init = cfg.initial_guess == InitialGuess::constant_velocity ? motion : Pose::identity();
    const Pose& prev_world = run.frames.back().pose_world;

    t0 = Clock::now();
    Reference curr = prepare(scans[k], cfg);
    try {
      const RegistrationResult r = register_pair(curr, prev, init, cfg);
      if (!finite_pose(r.pose)) {
        throw Error(ErrorCode::degenerate_correspondences, "registration produced a non-finite pose");
      }
      f.odometry = r.pose;
      f.diagnostics.converged = r.converged;
      f.diagnostics.iterations = r.iterations;
      f.diagnostics.condition_number = r.condition_number;
      f.diagnostics.fallback = r.fallback;
      f.diagnostics.message = r.fallback_reason;
    } catch (const Error& e) {
      f.odometry = Pose::identity();
      f.diagnostics.diverged = true;
      f.diagnostics.message = e.what();
    }
    f.odometry_ms = elapsed_ms(t0);
    f.pose_world = se3_compose(prev_world, f.odometry);

    if (mapping) {
      t0 = Clock::now();
      try {
        MappingResult m = feature_mapping(features_of(curr, cfg.method), std::move(map), f.pose_world, cfg.features);
        map = std::move(m.map);
        if (finite_pose(m.pose)) {
          f.pose_world = m.pose;
        }
        if (m.registration.fallback) {
          f.diagnostics.fallback = true;
          f.diagnostics.message = m.registration.fallback_reason;
        }
      } catch (const Error& e) {
        f.diagnostics.fallback = true;
        f.diagnostics.message = e.what();
      }
      f.mapping_ms = elapsed_ms(t0);
      f.diagnostics.mapped = true;
    }

    motion = se3_compose(se3_inverse(prev_world), f.pose_world);
    prev = std::move(curr);
    run.frames.push_back(std::move(f));
  }
  return run;
}

StageTiming stage_timing(std::span<const double> times_ms) {
  if (times_ms.empty()) {
    throw Error(ErrorCode::empty_input, "no timings");
  }
  StageTiming s;
  s.available = true;
  s.max_ms = *std::max_element(times_ms.begin(), times_ms.end());
  s.min_ms = *std::min_element(times_ms.begin(), times_ms.end());
  double sum = 0.0;
  for (const double t : times_ms) sum += t;
  s.mean_ms = sum / static_cast<double>(times_ms.size());
  return s;
}

PtpfSummary ptpf_summary(std::span<const FrameResult> frames) {
  if (frames.empty()) {
    throw Error(ErrorCode::empty_input, "no frames");
  }
  std::vector<double> odo;
  std::vector<double> map;
  bool mapped = false;
  for (const auto& f : frames) {
    odo.push_back(f.odometry_ms);
    map.push_back(f.mapping_ms);
    mapped = mapped || f.diagnostics.mapped;
  }
  PtpfSummary s;
  s.odometry = stage_timing(odo);
  s.mapping = stage_timing(map);
  s.mapping.available = mapped;
  return s;
}

std::string export_trajectory(const OdometryRun& run) { return format_trajectory(run.trajectory()); }

void export_trajectory(const OdometryRun& run, const std::filesystem::path& path) {
  write_file(path, export_trajectory(run));
}

}  // namespace lodom
