#include <lodom/evaluation.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <tuple>

#include <lodom/error.hpp>

namespace lodom {

bool is_time_ordered(const Trajectory& t) {
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i].timestamp > t[i - 1].timestamp)) {
      return false;
    }
  }
  return true;
}

std::vector<MatchedPair> align_timestamps(const Trajectory& est, const Trajectory& gt, double tol) {
  if (est.empty() || gt.empty()) {
    throw Error(ErrorCode::empty_input, "timestamp alignment needs two non-empty trajectories");
  }
  std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
  std::size_t lo = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t = est[i].timestamp;
    while (lo < gt.size() && gt[lo].timestamp < t - tol) {
      ++lo;
    }
    for (std::size_t j = lo; j < gt.size() && gt[j].timestamp <= t + tol; ++j) {
      candidates.emplace_back(std::abs(gt[j].timestamp - t), i, j);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<bool> est_used(est.size(), false);
  std::vector<bool> gt_used(gt.size(), false);
  std::vector<MatchedPair> out;
  for (const auto& [dt, i, j] : candidates) {
    if (!est_used[i] && !gt_used[j]) {
      est_used[i] = gt_used[j] = true;
      out.push_back({i, j});
    }
  }
  if (out.empty()) {
    throw Error(ErrorCode::no_overlap, "no timestamps match within " + std::to_string(tol) + " s");
  }
  std::sort(out.begin(), out.end(), [](const MatchedPair& a, const MatchedPair& b) { return a.est < b.est; });
  return out;
}

namespace {

RpeEntry rpe_entry(const Pose& est_i, const Pose& est_j, const Pose& gt_i, const Pose& gt_j, std::size_t i,
                   std::size_t j) {
  const Pose gt_rel = se3_inverse(gt_i) * gt_j;
  const Pose est_rel = se3_inverse(est_i) * est_j;
  RpeEntry e;
  e.i = i;
  e.j = j;
  e.error = se3_inverse(gt_rel) * est_rel;
  e.translation_error = e.error.translation.norm();
  e.rotation_error = rotation_angle(e.error.rotation) * 180.0 / std::numbers::pi;
  return e;
}

RpeSeries rpe_impl(std::span<const Pose> est, std::span<const Pose> gt, std::span<const double> times,
                   const RpeOptions& opt) {
  if (est.size() != gt.size()) {
    throw Error(ErrorCode::alignment_error, "rpe needs index-matched trajectories of equal length");
  }
  if (opt.delta < 1) {
    throw Error(ErrorCode::invalid_argument, "rpe delta must be at least 1");
  }
  RpeSeries out;
  if (opt.time_interval) {
    if (times.size() != est.size()) {
      throw Error(ErrorCode::invalid_argument, "time-based rpe needs timestamps");
    }
    std::size_t j = 0;
    for (std::size_t i = 0; i < est.size(); ++i) {
      j = std::max(j, i + 1);
      while (j < est.size() && times[j] - times[i] < *opt.time_interval) {
        ++j;
      }
      if (j >= est.size()) {
        break;
      }
      out.push_back(rpe_entry(est[i], est[j], gt[i], gt[j], i, j));
    }
    if (out.empty()) {
      throw Error(ErrorCode::insufficient_data, "trajectory shorter than the rpe time interval");
    }
    return out;
  }
  const auto delta = static_cast<std::size_t>(opt.delta);
  if (est.size() < delta + 1) {
    throw Error(ErrorCode::insufficient_data, "rpe needs at least delta + 1 matched poses");
  }
  for (std::size_t i = 0; i + delta < est.size(); ++i) {
    out.push_back(rpe_entry(est[i], est[i + delta], gt[i], gt[i + delta], i, i + delta));
  }
  return out;
}

}  // namespace

RpeSeries rpe(std::span<const Pose> est, std::span<const Pose> gt, const RpeOptions& opt) {
  if (opt.time_interval) {
    throw Error(ErrorCode::invalid_argument, "time-based rpe needs timestamped trajectories");
  }
  return rpe_impl(est, gt, {}, opt);
}

RpeSeries rpe(const Trajectory& est, const Trajectory& gt, const RpeOptions& opt, double tol) {
  const auto pairs = align_timestamps(est, gt, tol);
  std::vector<Pose> e;
  std::vector<Pose> g;
  std::vector<double> t;
  for (const auto& pr : pairs) {
    e.push_back(est[pr.est].pose);
    g.push_back(gt[pr.gt].pose);
    t.push_back(gt[pr.gt].timestamp);
  }
  return rpe_impl(e, g, t, opt);
}

std::vector<double> translation_errors(const RpeSeries& s) {
  std::vector<double> out;
  out.reserve(s.size());
  for (const auto& e : s) {
    out.push_back(e.translation_error);
  }
  return out;
}

std::vector<double> rotation_errors(const RpeSeries& s) {
  std::vector<double> out;
  out.reserve(s.size());
  for (const auto& e : s) {
    out.push_back(e.rotation_error);
  }
  return out;
}

double rmse(std::span<const double> errors) {
  if (errors.empty()) {
    throw Error(ErrorCode::empty_input, "rmse of an empty series");
  }
  double sum = 0.0;
  for (double e : errors) {
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(errors.size()));
}

double mean_abs(std::span<const double> errors) {
  if (errors.empty()) {
    throw Error(ErrorCode::empty_input, "mean of an empty series");
  }
  double sum = 0.0;
  for (double e : errors) {
    sum += std::abs(e);
  }
  return sum / static_cast<double>(errors.size());
}

std::vector<MotionDifference> motion_difference(std::span<const Pose> poses, double rotation_weight) {
  if (poses.size() < 2) {
    throw Error(ErrorCode::insufficient_data, "motion difference needs at least 2 poses");
  }
  std::vector<MotionDifference> out;
  out.reserve(poses.size() - 1);
  for (std::size_t k = 0; k + 1 < poses.size(); ++k) {
    const Pose rel = se3_inverse(poses[k]) * poses[k + 1];
    try {
      const Twist xi = se3_log(rel);
      Vec6 v;
      v << xi.v, rotation_weight * xi.w;
      out.push_back({v.norm(), false});
    } catch (const Error&) {
      out.push_back({std::numeric_limits<double>::quiet_NaN(), true});
    }
  }
  return out;
}

std::vector<MotionDifference> motion_difference(const Trajectory& t, double rotation_weight) {
  std::vector<Pose> poses;
  poses.reserve(t.size());
  for (const auto& sp : t) {
    poses.push_back(sp.pose);
  }
  return motion_difference(poses, rotation_weight);
}

std::size_t LabelSet::n_car() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), PointClass::car));
}

std::size_t LabelSet::n_bus() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), PointClass::bus));
}

LabelSet LabelSet::from_cloud(const PointCloud& c) {
  LabelSet out;
  out.labels.reserve(c.size());
  for (const auto& p : c.points) {
    const auto cls = static_cast<PointClass>(p.label);
    out.labels.push_back(cls == PointClass::car || cls == PointClass::bus ? cls : PointClass::other);
  }
  return out;
}

double dynamic_density(const LabelSet& labels) {
  if (labels.n_total() == 0) {
    throw Error(ErrorCode::empty_input, "dynamic density of an empty label set");
  }
  return static_cast<double>(labels.n_car() + labels.n_bus()) / static_cast<double>(labels.n_total()) * 100.0;
}

double dynamic_density(const PointCloud& scan, const LabelSet& labels) {
  if (scan.size() != labels.n_total()) {
    throw Error(ErrorCode::alignment_error, "label count " + std::to_string(labels.n_total()) +
                                                " does not match point count " + std::to_string(scan.size()));
  }
  return dynamic_density(labels);
}

void SkyMask::validate() const {
  if (azimuth_deg.empty() || azimuth_deg.size() != elevation_deg.size()) {
    throw Error(ErrorCode::validation_error, "skymask needs one elevation per azimuth bin");
  }
  const double step = 360.0 / static_cast<double>(azimuth_deg.size());
  constexpr double tol = 1e-6;
  for (std::size_t k = 0; k < azimuth_deg.size(); ++k) {
    const double expected = azimuth_deg[0] + step * static_cast<double>(k);
    if (std::abs(azimuth_deg[k] - expected) > tol) {
      throw Error(ErrorCode::validation_error,
                  "skymask azimuths must be equally spaced over [0, 360): bin " + std::to_string(k));
    }
    if (!(elevation_deg[k] >= 0.0 && elevation_deg[k] <= 90.0)) {
      throw Error(ErrorCode::validation_error,
                  "skymask elevation outside [0, 90] at bin " + std::to_string(k));
    }
  }
  if (!(azimuth_deg[0] >= 0.0 && azimuth_deg[0] < step)) {
    throw Error(ErrorCode::validation_error, "skymask azimuths must start within the first bin");
  }
}

double skymask_mea(const SkyMask& m) {
  if (m.elevation_deg.empty()) {
    throw Error(ErrorCode::empty_input, "skymask has no bins");
  }
  double sum = 0.0;
  for (double e : m.elevation_deg) {
    sum += e;
  }
  return sum / static_cast<double>(m.elevation_deg.size());
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) {
    throw Error(ErrorCode::empty_input, "quantile of an empty series");
  }
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

IqrResult iqr_outliers(std::span<const double> values) {
  if (values.size() < 4) {
    throw Error(ErrorCode::insufficient_data, "iqr outliers need at least 4 values");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  IqrResult r;
  r.q1 = quantile_sorted(sorted, 0.25);
  r.q3 = quantile_sorted(sorted, 0.75);
  r.iqr = r.q3 - r.q1;
  r.threshold = r.q3 + 1.5 * r.iqr;
  r.flags.resize(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    r.flags[k] = values[k] > r.threshold;
    if (r.flags[k]) {
      r.outliers.push_back(k);
    }
  }
  return r;
}

EvalReport build_report(const std::vector<NamedTrajectory>& estimates, const Trajectory& gt,
                        const FactorInputs& factors, const RpeOptions& opt, double tol) {
  if (gt.empty()) {
    throw Error(ErrorCode::empty_input, "report needs a ground-truth trajectory");
  }
  EvalReport report;
  for (const auto& named : estimates) {
    MethodReport m;
    m.name = named.name;
    const auto pairs = align_timestamps(named.trajectory, gt, tol);
    std::vector<Pose> e;
    std::vector<Pose> g;
    std::vector<double> t;
    for (const auto& pr : pairs) {
      e.push_back(named.trajectory[pr.est].pose);
      g.push_back(gt[pr.gt].pose);
      t.push_back(gt[pr.gt].timestamp);
    }
    m.rpe = rpe_impl(e, g, t, opt);
    for (const auto& entry : m.rpe) {
      m.frames.push_back(pairs[entry.j].gt);
    }
    const auto te = translation_errors(m.rpe);
    const auto re = rotation_errors(m.rpe);
    m.translation_rmse = rmse(te);
    m.translation_mean = mean_abs(te);
    m.rotation_rmse = rmse(re);
    m.rotation_mean = mean_abs(re);
    if (te.size() >= 4) {
      m.outliers = iqr_outliers(te);
      for (std::size_t k : m.outliers->outliers) {
        m.outlier_frames.push_back(m.frames[k]);
      }
    }
    report.methods.push_back(std::move(m));
  }
  if (gt.size() >= 2) {
    report.motion_difference = motion_difference(gt);
  }
  if (factors.labels) {
    std::vector<double> d;
    for (const auto& ls : *factors.labels) {
      d.push_back(dynamic_density(ls));
    }
    report.dynamic_density = std::move(d);
  }
  if (factors.skymasks) {
    std::vector<double> m;
    for (const auto& sk : *factors.skymasks) {
      m.push_back(skymask_mea(sk));
    }
    report.skymask_mea = std::move(m);
  }
  return report;
}

}  // namespace lodom
