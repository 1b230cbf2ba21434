#include <lodom/ground_segmentation.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include <lodom/error.hpp>

namespace lodom {

std::size_t GroundSegmentation::ground_count() const {
  return static_cast<std::size_t>(std::count(ground.begin(), ground.end(), true));
}

std::size_t GroundSegmentation::clustered_count() const {
  return static_cast<std::size_t>(std::count_if(cluster_id.begin(), cluster_id.end(), [](int c) { return c >= 0; }));
}

GroundSegmentation ground_segment(const PointCloud& scan, const SensorModel& sensor, const GroundParams& gp) {
  sensor.validate();
  constexpr double deg = std::numbers::pi / 180.0;
  GroundSegmentation seg;
  seg.rows = sensor.ring_count;
  seg.cols = sensor.columns();
  const std::size_t pixels = static_cast<std::size_t>(seg.rows) * static_cast<std::size_t>(seg.cols);
  seg.range_image.assign(pixels, std::numeric_limits<double>::infinity());
  seg.pixel_point.assign(pixels, -1);
  seg.ground.assign(scan.size(), false);
  seg.cluster_id.assign(scan.size(), -1);

  for (std::size_t i = 0; i < scan.size(); ++i) {
    const Point3& pt = scan[i];
    if (pt.ring < 0) {
      throw Error(ErrorCode::unorganized_scan, "point " + std::to_string(i) + " has no ring id");
    }
    if (pt.ring >= seg.rows) {
      continue;
    }
    double az = std::atan2(pt.xyz.y(), pt.xyz.x()) / deg;
    if (az < 0.0) {
      az += 360.0;
    }
    const int col = static_cast<int>(std::lround(az / sensor.azimuth_resolution_deg)) % seg.cols;
    const std::size_t pix = static_cast<std::size_t>(pt.ring * seg.cols + col);
    const double range = pt.xyz.norm();
    // Keep the nearest return per pixel.
    if (range < seg.range_image[pix]) {
      seg.range_image[pix] = range;
      seg.pixel_point[pix] = static_cast<long>(i);
    }
  }

  auto point_at = [&](int r, int c) { return seg.pixel_point[static_cast<std::size_t>(r * seg.cols + c)]; };

  // Ground: slope between vertically adjacent returns, rings below the horizon only.
  const double max_slope = gp.ground_angle_deg * deg;
  std::vector<bool> ground_pixel(pixels, false);
  for (int c = 0; c < seg.cols; ++c) {
    for (int r = 0; r + 1 < seg.rows; ++r) {
      if (sensor.ring_elevation_deg(r + 1) >= 0.0) {
        break;
      }
      const long lo = point_at(r, c);
      const long hi = point_at(r + 1, c);
      if (lo < 0 || hi < 0) {
        continue;
      }
      const Vec3 d = scan[static_cast<std::size_t>(hi)].xyz - scan[static_cast<std::size_t>(lo)].xyz;
      const double slope = std::atan2(std::abs(d.z()), std::hypot(d.x(), d.y()));
      if (slope <= max_slope) {
        ground_pixel[static_cast<std::size_t>(r * seg.cols + c)] = true;
        ground_pixel[static_cast<std::size_t>((r + 1) * seg.cols + c)] = true;
      }
    }
  }
  for (std::size_t pix = 0; pix < pixels; ++pix) {
    if (ground_pixel[pix]) {
      seg.ground[static_cast<std::size_t>(seg.pixel_point[pix])] = true;
    }
  }

  // Segments: breadth-first growth over non-ground pixels.
  const double min_beta = gp.cluster_angle_deg * deg;
  const double alpha_h = sensor.azimuth_resolution_deg * deg;
  const double alpha_v = sensor.ring_spacing_deg() * deg;
  std::vector<int> label(pixels, -1);
  std::vector<std::size_t> members;
  std::deque<std::pair<int, int>> queue;
  int next_label = 0;
  for (int r0 = 0; r0 < seg.rows; ++r0) {
    for (int c0 = 0; c0 < seg.cols; ++c0) {
      const std::size_t start = static_cast<std::size_t>(r0 * seg.cols + c0);
      if (seg.pixel_point[start] < 0 || ground_pixel[start] || label[start] != -1) {
        continue;
      }
      members.clear();
      label[start] = -2;
      queue.emplace_back(r0, c0);
      while (!queue.empty()) {
        const auto [r, c] = queue.front();
        queue.pop_front();
        const std::size_t pix = static_cast<std::size_t>(r * seg.cols + c);
        members.push_back(pix);
        const int nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
        for (int k = 0; k < 4; ++k) {
          const int nr = nbr[k][0];
          int nc = nbr[k][1];
          if (nr < 0 || nr >= seg.rows) {
            continue;
          }
          nc = (nc + seg.cols) % seg.cols;
          const std::size_t npix = static_cast<std::size_t>(nr * seg.cols + nc);
          if (seg.pixel_point[npix] < 0 || ground_pixel[npix] || label[npix] != -1) {
            continue;
          }
          const double d1 = std::max(seg.range_image[pix], seg.range_image[npix]);
          const double d2 = std::min(seg.range_image[pix], seg.range_image[npix]);
          const double alpha = k < 2 ? alpha_v : alpha_h;
          const double beta = std::atan2(d2 * std::sin(alpha), d1 - d2 * std::cos(alpha));
          if (beta > min_beta) {
            label[npix] = -2;
            queue.emplace_back(nr, nc);
          }
        }
      }

      std::vector<bool> rows_hit(static_cast<std::size_t>(seg.rows), false);
      for (std::size_t pix : members) {
        rows_hit[pix / static_cast<std::size_t>(seg.cols)] = true;
      }
      const auto row_span = std::count(rows_hit.begin(), rows_hit.end(), true);
      const bool keep = static_cast<int>(members.size()) >= gp.min_cluster_size ||
                        (static_cast<int>(members.size()) >= gp.min_line_cluster_size && row_span >= gp.min_cluster_rows);
      const int id = keep ? next_label++ : -3;
      for (std::size_t pix : members) {
        label[pix] = id;
        if (keep) {
          seg.cluster_id[static_cast<std::size_t>(seg.pixel_point[pix])] = id;
        }
      }
    }
  }
  seg.cluster_count = next_label;
  return seg;
}

}  // namespace lodom
