#include <lodom/dataio.hpp>

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <system_error>

#include <Eigen/Geometry>

#include <lodom/error.hpp>

namespace lodom {

namespace {

constexpr std::array<char, 8> kMagic = {'L', 'O', 'D', 'M', 'C', 'L', 'D', '\0'};

[[noreturn]] void parse_fail(std::size_t offset, const std::string& what) {
  throw Error(ErrorCode::parse_error, "byte " + std::to_string(offset) + ": " + what);
}

[[noreturn]] void line_fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::parse_error, "line " + std::to_string(line) + ": " + what);
}

class ByteWriter {
public:
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      parse_fail(pos_, std::string("truncated ") + what + " (need " + std::to_string(n) + " bytes, have " +
                           std::to_string(remaining()) + ")");
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes_[pos_ + k]) << (8 * k);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(bytes_[pos_ + k]) << (8 * k);
    pos_ += 8;
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::size_t point_record_size(std::uint32_t fields) {
  std::size_t n = 24;
  if (fields & cloud_fields::intensity) n += 4;
  if (fields & cloud_fields::ring) n += 4;
  if (fields & cloud_fields::label) n += 4;
  return n;
}

std::uint32_t fields_of(const PointCloud& c) {
  std::uint32_t f = 0;
  for (const auto& p : c.points) {
    if (p.intensity != 0.0f || std::signbit(p.intensity)) f |= cloud_fields::intensity;
    if (p.ring != -1) f |= cloud_fields::ring;
    if (p.label != -1) f |= cloud_fields::label;
  }
  return f;
}

CloudHeader read_header(ByteReader& r) {
  const std::string magic = r.str(kMagic.size(), "magic");
  if (std::memcmp(magic.data(), kMagic.data(), kMagic.size()) != 0) {
    parse_fail(0, "bad magic tag");
  }
  CloudHeader h;
  const std::size_t version_at = r.offset();
  h.version = r.u32("version");
  if (h.version != kCloudVersion) {
    parse_fail(version_at, "unsupported version " + std::to_string(h.version));
  }
  const std::size_t fields_at = r.offset();
  h.fields = r.u32("field layout");
  if ((h.fields & ~std::uint32_t{7}) != 0) {
    parse_fail(fields_at, "unknown field bits");
  }
  h.point_count = r.u64("point count");
  h.timestamp = r.f64("timestamp");
  const std::uint32_t len = r.u32("frame id length");
  h.frame_id = r.str(len, "frame id");
  return h;
}

PointCloud parse_native(std::span<const std::uint8_t> bytes, CloudReadStats& stats) {
  ByteReader r(bytes);
  const CloudHeader h = read_header(r);
  const std::size_t record = point_record_size(h.fields);
  const std::size_t payload_at = r.offset();
  if (h.point_count > r.remaining() / record) {
    const std::size_t whole = r.remaining() / record;
    parse_fail(payload_at + whole * record, "truncated payload: header declares " + std::to_string(h.point_count) +
                                                " points, data holds " + std::to_string(whole));
  }
  if (r.remaining() != h.point_count * record) {
    parse_fail(payload_at + h.point_count * record, "trailing bytes after payload");
  }
  PointCloud c;
  c.timestamp = h.timestamp;
  c.frame_id = h.frame_id;
  c.points.reserve(static_cast<std::size_t>(h.point_count));
  for (std::uint64_t i = 0; i < h.point_count; ++i) {
    Point3 p;
    p.xyz.x() = r.f64("x");
    p.xyz.y() = r.f64("y");
    p.xyz.z() = r.f64("z");
    if (h.fields & cloud_fields::intensity) p.intensity = r.f32("intensity");
    if (h.fields & cloud_fields::ring) p.ring = r.i32("ring");
    if (h.fields & cloud_fields::label) p.label = r.i32("label");
    if (!p.is_finite()) {
      ++stats.dropped_non_finite;
      continue;
    }
    c.points.push_back(p);
  }
  return c;
}

PointCloud parse_kitti(std::span<const std::uint8_t> bytes, CloudReadStats& stats) {
  if (bytes.size() % 16 != 0) {
    parse_fail(bytes.size() - bytes.size() % 16, "truncated record (kitti records are 16 bytes)");
  }
  ByteReader r(bytes);
  PointCloud c;
  c.points.reserve(bytes.size() / 16);
  while (r.remaining() > 0) {
    Point3 p;
    p.xyz.x() = r.f32("x");
    p.xyz.y() = r.f32("y");
    p.xyz.z() = r.f32("z");
    p.intensity = r.f32("intensity");
    if (!p.is_finite()) {
      ++stats.dropped_non_finite;
      continue;
    }
    c.points.push_back(p);
  }
  return c;
}

bool is_space(char ch) { return ch == ' ' || ch == '\t' || ch == '\r'; }

/// Splits a line (comment stripped) into whitespace-separated tokens.
std::vector<std::string_view> tokens_of(std::string_view line, char sep = '\0') {
  if (const auto hash = line.find('#'); hash != std::string_view::npos) {
    line = line.substr(0, hash);
  }
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (is_space(line[i]) || line[i] == sep)) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j]) && line[j] != sep) ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  const char* b = tok.data();
  const char* e = tok.data() + tok.size();
  if (b != e && *b == '+') ++b;
  const auto res = std::from_chars(b, e, out);
  return res.ec == std::errc() && res.ptr == e;
}

/// Calls fn(line_number, byte_offset, line) for each line.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t start = 0;
  std::size_t line = 1;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    fn(line, start, text.substr(start, end - start));
    start = end + 1;
    ++line;
  }
}

PointCloud parse_ascii(std::span<const std::uint8_t> bytes, CloudReadStats& stats) {
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  PointCloud c;
  for_each_line(text, [&](std::size_t, std::size_t offset, std::string_view line) {
    const auto tok = tokens_of(line);
    if (tok.empty()) return;
    if (tok.size() != 3 && tok.size() != 4 && tok.size() != 6) {
      parse_fail(offset, "expected 3, 4 or 6 columns, found " + std::to_string(tok.size()));
    }
    Point3 p;
    for (int k = 0; k < 3; ++k) {
      if (!parse_number(tok[static_cast<std::size_t>(k)], p.xyz(k))) {
        parse_fail(static_cast<std::size_t>(tok[static_cast<std::size_t>(k)].data() - text.data()), "bad number");
      }
    }
    if (tok.size() >= 4 && !parse_number(tok[3], p.intensity)) {
      parse_fail(static_cast<std::size_t>(tok[3].data() - text.data()), "bad intensity");
    }
    if (tok.size() == 6) {
      if (!parse_number(tok[4], p.ring)) parse_fail(static_cast<std::size_t>(tok[4].data() - text.data()), "bad ring");
      if (!parse_number(tok[5], p.label)) parse_fail(static_cast<std::size_t>(tok[5].data() - text.data()), "bad label");
    }
    if (!p.is_finite()) {
      ++stats.dropped_non_finite;
      return;
    }
    c.points.push_back(p);
  });
  return c;
}

std::string format_float(float v) {
  if (v == 0.0f) return "0";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::vector<std::uint8_t> serialize_ascii(const PointCloud& c) {
  const std::uint32_t f = fields_of(c);
  std::string out;
  for (const auto& p : c.points) {
    out += format_double(p.xyz.x()) + ' ' + format_double(p.xyz.y()) + ' ' + format_double(p.xyz.z());
    if (f & (cloud_fields::ring | cloud_fields::label)) {
      out += ' ' + format_float(p.intensity) + ' ' + std::to_string(p.ring) + ' ' + std::to_string(p.label);
    } else if (f & cloud_fields::intensity) {
      out += ' ' + format_float(p.intensity);
    }
    out += '\n';
  }
  return {out.begin(), out.end()};
}

const char* label_token(PointClass c) {
  switch (c) {
    case PointClass::car: return "car";
    case PointClass::bus: return "bus";
    default: return "other";
  }
}

}  // namespace

CloudFormat cloud_format_from_name(std::string_view name) {
  if (name == "native") return CloudFormat::native;
  if (name == "ascii-xyz") return CloudFormat::ascii_xyz;
  if (name == "kitti-bin") return CloudFormat::kitti_bin;
  throw Error(ErrorCode::invalid_argument, "unknown cloud format '" + std::string(name) + "'");
}

std::string_view cloud_format_name(CloudFormat f) {
  switch (f) {
    case CloudFormat::native: return "native";
    case CloudFormat::ascii_xyz: return "ascii-xyz";
    case CloudFormat::kitti_bin: return "kitti-bin";
  }
  return "native";
}

CloudHeader parse_cloud_header(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  return read_header(r);
}

PointCloud parse_cloud(std::span<const std::uint8_t> bytes, CloudFormat format, CloudReadStats* stats) {
  CloudReadStats local;
  CloudReadStats& s = stats ? *stats : local;
  switch (format) {
    case CloudFormat::native: return parse_native(bytes, s);
    case CloudFormat::ascii_xyz: return parse_ascii(bytes, s);
    case CloudFormat::kitti_bin: return parse_kitti(bytes, s);
  }
  throw Error(ErrorCode::invalid_argument, "unknown cloud format");
}

std::vector<std::uint8_t> serialize_cloud(const PointCloud& c, CloudFormat format) {
  if (format == CloudFormat::kitti_bin) {
    throw Error(ErrorCode::invalid_argument, "kitti-bin is read-only");
  }
  if (format == CloudFormat::ascii_xyz) {
    return serialize_ascii(c);
  }
  const std::uint32_t fields = fields_of(c);
  ByteWriter w;
  w.raw(kMagic.data(), kMagic.size());
  w.u32(kCloudVersion);
  w.u32(fields);
  w.u64(c.points.size());
  w.f64(c.timestamp);
  w.u32(static_cast<std::uint32_t>(c.frame_id.size()));
  w.raw(c.frame_id.data(), c.frame_id.size());
  for (const auto& p : c.points) {
    w.f64(p.xyz.x());
    w.f64(p.xyz.y());
    w.f64(p.xyz.z());
    if (fields & cloud_fields::intensity) w.f32(p.intensity);
    if (fields & cloud_fields::ring) w.i32(p.ring);
    if (fields & cloud_fields::label) w.i32(p.label);
  }
  return w.take();
}

PointCloud read_cloud(const std::filesystem::path& path, CloudFormat format, CloudReadStats* stats) {
  const auto bytes = read_binary_file(path);
  try {
    return parse_cloud(bytes, format, stats);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  write_file(path, serialize_cloud(cloud, format));
}

// ---------------------------------------------------------------------------
// Trajectories

std::string format_double(double v) {
  if (v == 0.0) return "0";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

Trajectory parse_trajectory(std::string_view text, TrajectoryReadStats* stats) {
  Trajectory t;
  for_each_line(text, [&](std::size_t line, std::size_t, std::string_view content) {
    const auto tok = tokens_of(content);
    if (tok.empty()) return;
    if (tok.size() != 8) {
      line_fail(line, "expected 8 fields 't tx ty tz qx qy qz qw', found " + std::to_string(tok.size()));
    }
    std::array<double, 8> v{};
    for (std::size_t k = 0; k < 8; ++k) {
      if (!parse_number(tok[k], v[k]) || !std::isfinite(v[k])) {
        line_fail(line, "field " + std::to_string(k + 1) + " is not a finite number");
      }
    }
    Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    const double norm = q.norm();
    if (!(norm > 1e-12)) {
      line_fail(line, "zero quaternion");
    }
    if (std::abs(norm - 1.0) > 1e-6 && stats) {
      stats->normalized_lines.push_back(line);
    }
    q.normalize();
    if (!t.empty() && !(v[0] > t.back().timestamp)) {
      line_fail(line, "timestamps must be strictly increasing");
    }
    t.push_back({v[0], Pose(q.toRotationMatrix(), Vec3(v[1], v[2], v[3]))});
  });
  return t;
}

std::string format_trajectory(const Trajectory& t) {
  std::string out = "# timestamp tx ty tz qx qy qz qw\n";
  for (const auto& sp : t) {
    Eigen::Quaterniond q(sp.pose.rotation);
    q.normalize();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    const Vec3& x = sp.pose.translation;
    out += format_double(sp.timestamp) + ' ' + format_double(x.x()) + ' ' + format_double(x.y()) + ' ' +
           format_double(x.z()) + ' ' + format_double(q.x()) + ' ' + format_double(q.y()) + ' ' +
           format_double(q.z()) + ' ' + format_double(q.w()) + '\n';
  }
  return out;
}

Trajectory read_trajectory(const std::filesystem::path& path, TrajectoryReadStats* stats) {
  const auto text = read_text_file(path);
  try {
    return parse_trajectory(text, stats);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_trajectory(const Trajectory& t, const std::filesystem::path& path) {
  write_file(path, format_trajectory(t));
}

// ---------------------------------------------------------------------------
// Labels and skymasks

LabelSet parse_labels(std::string_view text) {
  LabelSet s;
  for_each_line(text, [&](std::size_t line, std::size_t, std::string_view content) {
    const auto tok = tokens_of(content);
    if (tok.empty()) return;
    if (tok.size() != 1) line_fail(line, "expected one class token");
    if (tok[0] == "car") {
      s.labels.push_back(PointClass::car);
    } else if (tok[0] == "bus") {
      s.labels.push_back(PointClass::bus);
    } else if (tok[0] == "other") {
      s.labels.push_back(PointClass::other);
    } else {
      line_fail(line, "unknown class '" + std::string(tok[0]) + "'");
    }
  });
  return s;
}

std::string format_labels(const LabelSet& labels) {
  std::string out;
  for (const auto c : labels.labels) {
    out += label_token(c);
    out += '\n';
  }
  return out;
}

LabelSet read_labels(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  try {
    return parse_labels(text);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

LabelSet read_labels(const std::filesystem::path& path, const PointCloud& cloud) {
  LabelSet s = read_labels(path);
  if (s.n_total() != cloud.size()) {
    throw Error(ErrorCode::alignment_error, path.string() + ": " + std::to_string(s.n_total()) + " labels for " +
                                                std::to_string(cloud.size()) + " points");
  }
  return s;
}

void write_labels(const LabelSet& labels, const std::filesystem::path& path) {
  write_file(path, format_labels(labels));
}

SkyMask parse_skymask(std::string_view text) {
  SkyMask m;
  bool first = true;
  for_each_line(text, [&](std::size_t line, std::size_t, std::string_view content) {
    const auto tok = tokens_of(content, ',');
    if (tok.empty()) return;
    const bool header = first && tok.size() == 2 && tok[0] == "azimuth_deg" && tok[1] == "elevation_deg";
    first = false;
    if (header) return;
    if (tok.size() != 2) line_fail(line, "expected 'azimuth_deg,elevation_deg'");
    double az = 0.0;
    double el = 0.0;
    if (!parse_number(tok[0], az) || !parse_number(tok[1], el) || !std::isfinite(az) || !std::isfinite(el)) {
      line_fail(line, "bad number");
    }
    m.azimuth_deg.push_back(az);
    m.elevation_deg.push_back(el);
  });
  m.validate();
  return m;
}

std::string format_skymask(const SkyMask& m) {
  std::string out = "azimuth_deg,elevation_deg\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    out += format_double(m.azimuth_deg[i]) + ',' + format_double(m.elevation_deg[i]) + '\n';
  }
  return out;
}

SkyMask read_skymask(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  try {
    return parse_skymask(text);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_skymask(const SkyMask& m, const std::filesystem::path& path) { write_file(path, format_skymask(m)); }

// ---------------------------------------------------------------------------
// Files

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::io_error, "cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw Error(ErrorCode::io_error, "read failed: " + path.string());
  }
  return bytes;
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_binary_file(path);
  return {bytes.begin(), bytes.end()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::io_error, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw Error(ErrorCode::io_error, "write failed: " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::io_error, "cannot write " + path.string());
  }
}

void write_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace lodom
