#include <lodom/bench.hpp>

#include <cstdio>

#include <lodom/dataio.hpp>
#include <lodom/error.hpp>

#include "json_util.hpp"

namespace lodom {

namespace {

using namespace detail;

std::string numbered(const char* prefix, std::size_t k, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%06zu%s", prefix, k, suffix);
  return buf;
}

const MethodReport* report_for(const SuiteResult& r, const std::string& name) {
  if (!r.evaluation) return nullptr;
  for (const auto& m : r.evaluation->methods) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

json series(const std::vector<double>& v) {
  json a = json::array();
  for (const double x : v) a.push_back(x);
  return a;
}

std::string csv_opt(const std::optional<std::vector<double>>& s, std::size_t k) {
  return s && k < s->size() ? format_double((*s)[k]) : std::string();
}

}  // namespace

SuiteInput load_suite_input(const RunConfig& cfg) {
  SuiteInput in;
  if (cfg.synthetic) {
    SyntheticSequence seq = generate_sequence(*cfg.synthetic, cfg.synthetic_skymasks);
    in.ground_truth = seq.ground_truth;
    std::vector<LabelSet> labels;
    for (const auto& s : seq.scans) labels.push_back(LabelSet::from_cloud(s));
    in.factors.labels = std::move(labels);
    if (cfg.synthetic_skymasks) in.factors.skymasks = std::move(seq.skymasks);
    in.scans = std::move(seq.scans);
    return in;
  }
  if (!cfg.dataset) {
    throw Error(ErrorCode::schema_error, "config has no input");
  }
  const DatasetInput& d = *cfg.dataset;
  for (const auto& p : d.clouds) {
    in.scans.push_back(read_cloud(p, d.format));
  }
  if (d.ground_truth) {
    in.ground_truth = read_trajectory(*d.ground_truth);
    if (in.ground_truth.size() == in.scans.size()) {
      // Clouds without their own timestamps take the ground-truth ones.
      for (std::size_t k = 0; k < in.scans.size(); ++k) {
        if (in.scans[k].timestamp == 0.0) in.scans[k].timestamp = in.ground_truth[k].timestamp;
      }
    }
  }
  if (!d.labels.empty()) {
    std::vector<LabelSet> labels;
    for (std::size_t k = 0; k < d.labels.size(); ++k) labels.push_back(read_labels(d.labels[k], in.scans[k]));
    in.factors.labels = std::move(labels);
  }
  if (!d.skymasks.empty()) {
    std::vector<SkyMask> masks;
    for (const auto& p : d.skymasks) masks.push_back(read_skymask(p));
    in.factors.skymasks = std::move(masks);
  }
  return in;
}

SuiteResult run_suite(const RunConfig& cfg, const SuiteInput& input) {
  SuiteResult result;
  std::vector<NamedTrajectory> estimates;
  for (const auto& spec : cfg.runs) {
    MethodOutcome o;
    o.name = spec.name;
    o.method = spec.odometry.method;
    try {
      o.run = run_odometry(input.scans, spec.odometry);
      estimates.push_back({spec.name, o.run->trajectory()});
    } catch (const Error& e) {
      o.error = e.what();
    }
    result.outcomes.push_back(std::move(o));
  }
  if (!input.ground_truth.empty() && !estimates.empty()) {
    RpeOptions opt;
    opt.delta = cfg.evaluation.delta;
    try {
      result.evaluation = build_report(estimates, input.ground_truth, input.factors, opt, cfg.evaluation.tolerance);
      if (input.ground_truth.size() >= 2) {
        result.evaluation->motion_difference = motion_difference(input.ground_truth, cfg.evaluation.rotation_weight);
      }
    } catch (const Error& e) {
      result.evaluation.reset();
      result.evaluation_error = e.what();
    }
  }
  return result;
}

std::string report_json(const SuiteResult& r, const std::string& config_json) {
  json j;
  if (!config_json.empty()) {
    j["config"] = json::parse(config_json);
  }
  j["methods"] = json::array();
  for (const auto& o : r.outcomes) {
    json m;
    m["name"] = o.name;
    m["method"] = std::string(method_name(o.method));
    m["status"] = o.run ? "ok" : "failed";
    if (!o.run) {
      m["error"] = o.error;
    } else {
      m["frames"] = o.run->frames.size();
      json diverged = json::array();
      for (const auto& f : o.run->frames) {
        if (f.diagnostics.diverged) diverged.push_back(f.frame_index);
      }
      m["diverged_frames"] = diverged;
    }
    if (const MethodReport* rep = report_for(r, o.name)) {
      m["translation_rmse_m"] = rep->translation_rmse;
      m["translation_mean_m"] = rep->translation_mean;
      m["rotation_rmse_deg"] = rep->rotation_rmse;
      m["rotation_mean_deg"] = rep->rotation_mean;
      m["rpe_frames"] = rep->frames;
      m["translation_errors_m"] = series(translation_errors(rep->rpe));
      m["rotation_errors_deg"] = series(rotation_errors(rep->rpe));
      if (rep->outliers) {
        m["outliers"] = {{"q1", rep->outliers->q1},
                         {"q3", rep->outliers->q3},
                         {"iqr", rep->outliers->iqr},
                         {"threshold", rep->outliers->threshold},
                         {"frames", rep->outlier_frames}};
      }
    }
    j["methods"].push_back(m);
  }
  if (!r.evaluation_error.empty()) {
    j["evaluation_error"] = r.evaluation_error;
  }
  if (r.evaluation) {
    json f;
    json md = json::array();
    for (const auto& d : r.evaluation->motion_difference) {
      md.push_back(d.flagged ? json(nullptr) : json(d.value));
    }
    f["motion_difference"] = md;
    if (r.evaluation->dynamic_density) f["dynamic_density_pct"] = series(*r.evaluation->dynamic_density);
    if (r.evaluation->skymask_mea) f["skymask_mea_deg"] = series(*r.evaluation->skymask_mea);
    j["factors"] = f;
  }
  return j.dump(2) + "\n";
}

std::string report_csv(const SuiteResult& r) {
  std::string out =
      "name,method,status,frames,diverged,translation_rmse_m,translation_mean_m,rotation_rmse_deg,rotation_mean_deg\n";
  for (const auto& o : r.outcomes) {
    out += o.name + ',' + std::string(method_name(o.method)) + ',' + (o.run ? "ok" : "failed") + ',';
    out += o.run ? std::to_string(o.run->frames.size()) + ',' + std::to_string(o.run->diverged_count()) : ",";
    if (const MethodReport* rep = report_for(r, o.name)) {
      out += ',' + format_double(rep->translation_rmse) + ',' + format_double(rep->translation_mean) + ',' +
             format_double(rep->rotation_rmse) + ',' + format_double(rep->rotation_mean);
    } else {
      out += ",,,,";
    }
    out += '\n';
  }
  return out;
}

std::string frame_errors_csv(const SuiteResult& r) {
  std::string out =
      "name,frame,translation_error_m,rotation_error_deg,outlier,motion_difference,dynamic_density_pct,"
      "skymask_mea_deg\n";
  if (!r.evaluation) return out;
  const EvalReport& e = *r.evaluation;
  for (const auto& m : e.methods) {
    for (std::size_t k = 0; k < m.rpe.size(); ++k) {
      const std::size_t frame = m.frames[k];
      const bool outlier = m.outliers && m.outliers->flags[k];
      std::string md;
      if (frame >= 1 && frame - 1 < e.motion_difference.size() && !e.motion_difference[frame - 1].flagged) {
        md = format_double(e.motion_difference[frame - 1].value);
      }
      out += m.name + ',' + std::to_string(frame) + ',' + format_double(m.rpe[k].translation_error) + ',' +
             format_double(m.rpe[k].rotation_error) + ',' + (outlier ? "1" : "0") + ',' + md + ',' +
             csv_opt(e.dynamic_density, frame) + ',' + csv_opt(e.skymask_mea, frame) + '\n';
    }
  }
  return out;
}

std::string efficiency_csv(const SuiteResult& r) {
  std::string out =
      "name,method,odometry_max_ms,odometry_min_ms,odometry_mean_ms,mapping_max_ms,mapping_min_ms,mapping_mean_ms,"
      "translation_rmse_m\n";
  for (const auto& o : r.outcomes) {
    if (!o.run) continue;
    const PtpfSummary s = ptpf_summary(o.run->frames);
    out += o.name + ',' + std::string(method_name(o.method)) + ',' + format_double(s.odometry.max_ms) + ',' +
           format_double(s.odometry.min_ms) + ',' + format_double(s.odometry.mean_ms) + ',';
    if (s.mapping.available) {
      out += format_double(s.mapping.max_ms) + ',' + format_double(s.mapping.min_ms) + ',' +
             format_double(s.mapping.mean_ms);
    } else {
      out += "N/A,N/A,N/A";
    }
    const MethodReport* rep = report_for(r, o.name);
    out += ',' + (rep ? format_double(rep->translation_rmse) : std::string()) + '\n';
  }
  return out;
}

std::string ptpf_csv(const OdometryRun& run) {
  std::string out = "frame,timestamp,odometry_ms,mapping_ms,converged,iterations,diverged,fallback\n";
  for (const auto& f : run.frames) {
    out += std::to_string(f.frame_index) + ',' + format_double(f.timestamp) + ',' + format_double(f.odometry_ms) +
           ',' + format_double(f.mapping_ms) + ',' + (f.diagnostics.converged ? "1" : "0") + ',' +
           std::to_string(f.diagnostics.iterations) + ',' + (f.diagnostics.diverged ? "1" : "0") + ',' +
           (f.diagnostics.fallback ? "1" : "0") + '\n';
  }
  return out;
}

void write_suite_artifacts(const SuiteResult& r, const std::string& config_json, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::io_error, "cannot create " + dir.string() + ": " + ec.message());
  }
  for (const auto& o : r.outcomes) {
    if (!o.run) continue;
    export_trajectory(*o.run, dir / (o.name + ".traj"));
    write_file(dir / (o.name + "_ptpf.csv"), ptpf_csv(*o.run));
  }
  write_file(dir / "report.json", report_json(r, config_json));
  write_file(dir / "report.csv", report_csv(r));
  write_file(dir / "frame_errors.csv", frame_errors_csv(r));
  write_file(dir / "efficiency.csv", efficiency_csv(r));
}

void write_synthetic_dataset(const SyntheticSequence& seq, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::io_error, "cannot create " + dir.string() + ": " + ec.message());
  }
  json manifest;
  manifest["format"] = "native";
  manifest["clouds"] = json::array();
  manifest["labels"] = json::array();
  for (std::size_t k = 0; k < seq.scans.size(); ++k) {
    const std::string cloud = numbered("scan_", k, ".lcd");
    const std::string labels = numbered("labels_", k, ".txt");
    write_cloud(seq.scans[k], dir / cloud, CloudFormat::native);
    write_labels(LabelSet::from_cloud(seq.scans[k]), dir / labels);
    manifest["clouds"].push_back(cloud);
    manifest["labels"].push_back(labels);
  }
  if (!seq.skymasks.empty()) {
    manifest["skymasks"] = json::array();
    for (std::size_t k = 0; k < seq.skymasks.size(); ++k) {
      const std::string name = numbered("skymask_", k, ".csv");
      write_skymask(seq.skymasks[k], dir / name);
      manifest["skymasks"].push_back(name);
    }
  }
  write_trajectory(seq.ground_truth, dir / "ground_truth.traj");
  manifest["ground_truth"] = "ground_truth.traj";
  const SensorModel& s = seq.sensor;
  manifest["sensor"] = {{"ring_count", s.ring_count},
                        {"vertical_min_deg", s.vertical_min_deg},
                        {"vertical_max_deg", s.vertical_max_deg},
                        {"azimuth_resolution_deg", s.azimuth_resolution_deg},
                        {"min_range", s.min_range},
                        {"max_range", s.max_range},
                        {"range_noise_sigma", s.range_noise_sigma}};
  write_file(dir / "dataset.json", manifest.dump(2) + "\n");
}

}  // namespace lodom
