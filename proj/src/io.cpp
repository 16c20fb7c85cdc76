#include "airseg/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

#include "airseg/error.hpp"

namespace airseg::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ValidationError(what + ": '" + s + "' is not a number");
  return v;
}

std::int64_t parse_int(const std::string& s, const std::string& what) {
  std::int64_t v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ValidationError(what + ": '" + s + "' is not an integer");
  }
  return v;
}

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(bytes, sizeof(T));
}

template <typename T>
T get_bytes(const char* p, bool little) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if (little != (std::endian::native == std::endian::little)) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

// Reads whitespace-separated header tokens (skipping '#' comments) starting
// at `pos`; leaves `pos` just past the single whitespace byte after the last.
std::vector<std::string> read_header_tokens(const std::string& bytes, std::size_t count,
                                            std::size_t& pos) {
  std::vector<std::string> toks;
  while (toks.size() < count && pos < bytes.size()) {
    const char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      std::size_t end = pos;
      while (end < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[end]))) ++end;
      toks.push_back(bytes.substr(pos, end - pos));
      pos = end;
    }
  }
  if (toks.size() < count || pos >= bytes.size()) return {};
  ++pos;  // single whitespace byte before the raster
  return toks;
}

std::string matrix_row(const Mat4& m, int r) {
  std::string s;
  for (int c = 0; c < 4; ++c) {
    if (c) s += ' ';
    s += format_double(m(r, c));
  }
  return s;
}

SimilarityTransform similarity_from_rows(const KeyValues& kv, const std::string& prefix,
                                         const std::string& origin) {
  Mat4 m;
  for (int r = 0; r < 4; ++r) {
    const std::string key = prefix + "row" + std::to_string(r);
    auto it = kv.find(key);
    if (it == kv.end()) throw ValidationError(origin + ": missing '" + key + "'");
    const auto toks = split_ws(it->second);
    if (toks.size() != 4) throw ValidationError(origin + ": '" + key + "' needs 4 values");
    for (int c = 0; c < 4; ++c) m(r, c) = parse_double(toks[c], origin + ": " + key);
  }
  const double scale = kv_double(kv, prefix + "scale", origin);
  if (!(scale > 0.0)) throw ValidationError(origin + ": scale must be positive");
  const Mat3 r = m.topLeftCorner<3, 3>() / scale;
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
      r.determinant() < 0.0) {
    throw ValidationError(origin + ": matrix is not scale times a proper rotation");
  }
  return SimilarityTransform::FromMatrix(scale, r, m.topRightCorner<3, 1>());
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " to " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ValidationError(origin + ":" + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const fs::path& path) {
  return parse_key_values(read_file(path), path.string());
}

double kv_double(const KeyValues& kv, const std::string& key, const std::string& origin) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ValidationError(origin + ": missing '" + key + "'");
  return parse_double(it->second, origin + ": " + key);
}

int kv_int(const KeyValues& kv, const std::string& key, const std::string& origin) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ValidationError(origin + ": missing '" + key + "'");
  return int(parse_int(it->second, origin + ": " + key));
}

// ---------------------------------------------------------------------------

CameraIntrinsics DatasetCamera::frame() const {
  CameraIntrinsics k = raw.undistorted();
  if (crop_width || crop_height) {
    k = crop_intrinsics(k, crop_width.value_or(k.width), crop_height.value_or(k.height));
  }
  return k;
}

bool DatasetCamera::needs_mask_remap() const {
  return raw.distortion_model != DistortionModel::kNone || crop_width || crop_height;
}

int DatasetCamera::inv_depth_width() const { return depth_width.value_or(frame().width); }
int DatasetCamera::inv_depth_height() const { return depth_height.value_or(frame().height); }

DatasetCamera parse_camera(const KeyValues& kv, const std::string& origin) {
  static const std::set<std::string> known = {
      "width",    "height",     "fx",          "fy",          "cx",          "cy",
      "distortion_model", "coefficients", "crop_width", "crop_height", "depth_width",
      "depth_height"};
  for (const auto& [k, v] : kv) {
    if (!known.count(k)) throw ValidationError(origin + ": unknown key '" + k + "'");
  }
  DatasetCamera cam;
  cam.raw.width = kv_int(kv, "width", origin);
  cam.raw.height = kv_int(kv, "height", origin);
  cam.raw.fx = kv_double(kv, "fx", origin);
  cam.raw.fy = kv_double(kv, "fy", origin);
  cam.raw.cx = kv_double(kv, "cx", origin);
  cam.raw.cy = kv_double(kv, "cy", origin);
  if (auto it = kv.find("distortion_model"); it != kv.end()) {
    cam.raw.distortion_model = distortion_model_from_string(it->second);
  }
  if (auto it = kv.find("coefficients"); it != kv.end()) {
    for (const auto& tok : split_ws(it->second)) {
      cam.raw.coefficients.push_back(parse_double(tok, origin + ": coefficients"));
    }
  }
  auto opt_int = [&](const char* key) -> std::optional<int> {
    if (!kv.count(key)) return std::nullopt;
    return kv_int(kv, key, origin);
  };
  cam.crop_width = opt_int("crop_width");
  cam.crop_height = opt_int("crop_height");
  cam.depth_width = opt_int("depth_width");
  cam.depth_height = opt_int("depth_height");
  try {
    cam.raw.validate();
    const CameraIntrinsics frame = cam.frame();
    frame.validate();
    if (cam.inv_depth_width() <= 0 || cam.inv_depth_height() <= 0) {
      throw ValidationError("depth size must be positive");
    }
  } catch (const ValidationError& e) {
    throw ValidationError(origin + ": " + e.what());
  }
  return cam;
}

std::string format_camera(const DatasetCamera& cam) {
  std::ostringstream out;
  const CameraIntrinsics& k = cam.raw;
  out << "# camera intrinsics (pixels; pixel (0,0) is the center of the top-left pixel)\n";
  out << "width = " << k.width << "\nheight = " << k.height << "\n";
  out << "fx = " << format_double(k.fx) << "\nfy = " << format_double(k.fy) << "\n";
  out << "cx = " << format_double(k.cx) << "\ncy = " << format_double(k.cy) << "\n";
  out << "distortion_model = " << to_string(k.distortion_model) << "\n";
  out << "coefficients =";
  for (double c : k.coefficients) out << ' ' << format_double(c);
  out << "\n";
  if (cam.crop_width) out << "crop_width = " << *cam.crop_width << "\n";
  if (cam.crop_height) out << "crop_height = " << *cam.crop_height << "\n";
  if (cam.depth_width) out << "depth_width = " << *cam.depth_width << "\n";
  if (cam.depth_height) out << "depth_height = " << *cam.depth_height << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------

std::vector<PoseEntry> parse_poses(const std::string& text, const std::string& origin) {
  std::vector<PoseEntry> poses;
  std::set<std::int64_t> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 8) {
      throw ValidationError(where + ": expected 'frame_id tx ty tz qx qy qz qw'");
    }
    PoseEntry e;
    e.frame_id = parse_int(toks[0], where + ": frame_id");
    if (e.frame_id < 0) throw ValidationError(where + ": negative frame id");
    double v[7];
    for (int i = 0; i < 7; ++i) v[i] = parse_double(toks[i + 1], where);
    const Quat q(v[6], v[3], v[4], v[5]);
    if (!std::isfinite(q.norm()) || std::abs(q.norm() - 1.0) > 1e-3) {
      throw ValidationError(where + ": quaternion is not unit length");
    }
    e.pose = Pose(q, Vec3(v[0], v[1], v[2]));
    if (!seen.insert(e.frame_id).second) {
      throw ValidationError(where + ": duplicate frame id " + std::to_string(e.frame_id));
    }
    poses.push_back(e);
  }
  return poses;
}

std::string format_poses(const std::vector<PoseEntry>& poses) {
  std::string out = "# frame_id tx ty tz qx qy qz qw (camera-to-world, mm)\n";
  for (const auto& e : poses) {
    const Vec3& t = e.pose.translation();
    const Quat& q = e.pose.rotation();
    out += std::to_string(e.frame_id);
    for (double v : {t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()}) {
      out += ' ';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string encode_pfm(const InverseDepthMap& map) {
  std::string out = "Pf\n" + std::to_string(map.width) + " " + std::to_string(map.height) +
                    "\n-1.0\n";
  out.reserve(out.size() + map.size() * 4);
  for (int v = map.height - 1; v >= 0; --v) {
    for (int u = 0; u < map.width; ++u) put_le(out, float(map(u, v)));
  }
  return out;
}

InverseDepthMap decode_pfm(const std::string& bytes, const std::string& origin) {
  std::size_t pos = 0;
  const auto toks = read_header_tokens(bytes, 4, pos);
  if (toks.size() != 4 || toks[0] != "Pf") {
    throw ValidationError(origin + ": not a single-channel PFM file");
  }
  const auto w = parse_int(toks[1], origin + ": width");
  const auto h = parse_int(toks[2], origin + ": height");
  const double scale = parse_double(toks[3], origin + ": scale");
  if (w <= 0 || h <= 0 || w > 1'000'000 || h > 1'000'000 || scale == 0.0) {
    throw ValidationError(origin + ": invalid PFM header");
  }
  const std::size_t need = std::size_t(w) * std::size_t(h) * 4;
  if (bytes.size() - pos < need) {
    throw ValidationError(origin + ": truncated data (expected " + std::to_string(need) +
                          " bytes, got " + std::to_string(bytes.size() - pos) + ")");
  }
  const bool little = scale < 0.0;
  InverseDepthMap map(int(w), int(h), 0.0);
  const char* p = bytes.data() + pos;
  for (int v = int(h) - 1; v >= 0; --v) {
    for (int u = 0; u < w; ++u, p += 4) map(u, v) = get_bytes<float>(p, little);
  }
  return map;
}

std::string encode_mask_pgm(const SegmentationMask& mask) {
  std::string out = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) +
                    "\n255\n";
  out.reserve(out.size() + mask.size());
  for (auto b : mask.data) out.push_back(char(b ? 255 : 0));
  return out;
}

SegmentationMask decode_mask_pgm(const std::string& bytes, const std::string& origin) {
  std::size_t pos = 0;
  const auto toks = read_header_tokens(bytes, 4, pos);
  if (toks.size() != 4 || toks[0] != "P5") throw ValidationError(origin + ": not a binary PGM");
  const auto w = parse_int(toks[1], origin + ": width");
  const auto h = parse_int(toks[2], origin + ": height");
  const auto maxval = parse_int(toks[3], origin + ": maxval");
  if (w <= 0 || h <= 0 || w > 1'000'000 || h > 1'000'000 || maxval != 255) {
    throw ValidationError(origin + ": unsupported PGM header (8-bit masks only)");
  }
  const std::size_t need = std::size_t(w) * std::size_t(h);
  if (bytes.size() - pos < need) {
    throw ValidationError(origin + ": truncated data (expected " + std::to_string(need) +
                          " bytes, got " + std::to_string(bytes.size() - pos) + ")");
  }
  SegmentationMask mask(int(w), int(h), 0);
  for (std::size_t i = 0; i < need; ++i) {
    const auto b = static_cast<unsigned char>(bytes[pos + i]);
    if (b != 0 && b != 255) {
      throw ValidationError(origin + ": non-binary mask value " + std::to_string(b) +
                            " at pixel " + std::to_string(i));
    }
    mask.data[i] = b ? 1 : 0;
  }
  return mask;
}

// ---------------------------------------------------------------------------

Rgb label_color(PointLabel label) {
  return label == PointLabel::kObstruction ? Rgb{255, 0, 0} : Rgb{128, 128, 128};
}

std::string encode_labeled_ply(const LabeledPointCloud& cloud) {
  cloud.validate();
  std::string out =
      "ply\nformat binary_little_endian 1.0\ncomment units mm\nelement vertex " +
      std::to_string(cloud.size()) +
      "\nproperty float x\nproperty float y\nproperty float z\n"
      "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      "property uchar label\nend_header\n";
  out.reserve(out.size() + cloud.size() * 16);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    put_le(out, float(p.x()));
    put_le(out, float(p.y()));
    put_le(out, float(p.z()));
    for (auto c : label_color(cloud.labels[i])) out.push_back(char(c));
    out.push_back(char(static_cast<std::uint8_t>(cloud.labels[i])));
  }
  return out;
}

std::string encode_heatmap_ply(const HeatmapCloud& heat) {
  if (heat.points.size() != heat.distances.size() || heat.points.size() != heat.colors.size()) {
    throw ValidationError("heatmap: parallel arrays differ in length");
  }
  std::string out =
      "ply\nformat binary_little_endian 1.0\ncomment units mm; color = distance to closest "
      "CT point\nelement vertex " +
      std::to_string(heat.points.size()) +
      "\nproperty float x\nproperty float y\nproperty float z\n"
      "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      "property float distance\nend_header\n";
  out.reserve(out.size() + heat.points.size() * 19);
  for (std::size_t i = 0; i < heat.points.size(); ++i) {
    const Vec3& p = heat.points[i];
    put_le(out, float(p.x()));
    put_le(out, float(p.y()));
    put_le(out, float(p.z()));
    for (auto c : heat.colors[i]) out.push_back(char(c));
    put_le(out, float(heat.distances[i]));
  }
  return out;
}

namespace {

struct PlyProperty {
  std::string name;
  std::string type;
  std::size_t size = 0;
  std::size_t offset = 0;
};

std::size_t ply_type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
      t == "float32") {
    return 4;
  }
  if (t == "double" || t == "float64") return 8;
  return 0;
}

double ply_read_binary(const char* p, const std::string& t) {
  if (t == "char" || t == "int8") return get_bytes<std::int8_t>(p, true);
  if (t == "uchar" || t == "uint8") return get_bytes<std::uint8_t>(p, true);
  if (t == "short" || t == "int16") return get_bytes<std::int16_t>(p, true);
  if (t == "ushort" || t == "uint16") return get_bytes<std::uint16_t>(p, true);
  if (t == "int" || t == "int32") return get_bytes<std::int32_t>(p, true);
  if (t == "uint" || t == "uint32") return get_bytes<std::uint32_t>(p, true);
  if (t == "float" || t == "float32") return get_bytes<float>(p, true);
  return get_bytes<double>(p, true);
}

}  // namespace

LabeledPointCloud decode_ply(const std::string& bytes, const std::string& origin) {
  const auto end_marker = bytes.find("end_header");
  if (bytes.rfind("ply", 0) != 0 || end_marker == std::string::npos) {
    throw ValidationError(origin + ": not a PLY file");
  }
  std::size_t body = bytes.find('\n', end_marker);
  if (body == std::string::npos) throw ValidationError(origin + ": truncated PLY header");
  ++body;

  std::istringstream header(bytes.substr(0, end_marker));
  std::string line, format;
  std::size_t vertex_count = 0;
  bool in_vertex = false, seen_vertex = false;
  std::vector<PlyProperty> props;
  std::size_t stride = 0;
  while (std::getline(header, line)) {
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks[0] == "format" && toks.size() >= 2) {
      format = toks[1];
    } else if (toks[0] == "element" && toks.size() == 3) {
      if (seen_vertex && !in_vertex) continue;
      in_vertex = toks[1] == "vertex";
      if (!in_vertex && !seen_vertex) {
        throw ValidationError(origin + ": elements before 'vertex' are not supported");
      }
      if (in_vertex) {
        seen_vertex = true;
        vertex_count = std::size_t(parse_int(toks[2], origin + ": vertex count"));
      }
    } else if (toks[0] == "property" && in_vertex) {
      if (toks.size() != 3) throw ValidationError(origin + ": list properties on vertices");
      PlyProperty p{toks[2], toks[1], ply_type_size(toks[1]), stride};
      if (p.size == 0) throw ValidationError(origin + ": unknown property type " + toks[1]);
      stride += p.size;
      props.push_back(p);
    } else if (toks[0] == "element") {
      in_vertex = false;
    }
  }
  if (!seen_vertex) throw ValidationError(origin + ": no vertex element");
  auto find = [&](const std::string& name) -> const PlyProperty* {
    for (const auto& p : props) {
      if (p.name == name) return &p;
    }
    return nullptr;
  };
  const PlyProperty* px = find("x");
  const PlyProperty* py = find("y");
  const PlyProperty* pz = find("z");
  const PlyProperty* pl = find("label");
  if (!px || !py || !pz) throw ValidationError(origin + ": vertex lacks x/y/z");

  LabeledPointCloud cloud;
  cloud.points.reserve(vertex_count);
  cloud.labels.reserve(vertex_count);
  auto add = [&](double x, double y, double z, double label) {
    const Vec3 p(x, y, z);
    if (!p.allFinite()) {
      throw ValidationError(origin + ": vertex " + std::to_string(cloud.size()) +
                            " is not finite");
    }
    cloud.push_back(p, label != 0.0 ? PointLabel::kObstruction : PointLabel::kBackground);
  };
  if (format == "binary_little_endian") {
    if ((bytes.size() - body) / stride < vertex_count) {
      throw ValidationError(origin + ": truncated vertex data");
    }
    const char* base = bytes.data() + body;
    for (std::size_t i = 0; i < vertex_count; ++i, base += stride) {
      add(ply_read_binary(base + px->offset, px->type), ply_read_binary(base + py->offset, py->type),
          ply_read_binary(base + pz->offset, pz->type),
          pl ? ply_read_binary(base + pl->offset, pl->type) : 0.0);
    }
  } else if (format == "ascii") {
    std::istringstream in(bytes.substr(body));
    for (std::size_t i = 0; i < vertex_count; ++i) {
      if (!std::getline(in, line)) throw ValidationError(origin + ": truncated vertex data");
      const auto toks = split_ws(line);
      if (toks.size() < props.size()) throw ValidationError(origin + ": short vertex line");
      auto value = [&](const PlyProperty* p) {
        const auto idx = std::size_t(p - props.data());
        return parse_double(toks[idx], origin);
      };
      add(value(px), value(py), value(pz), pl ? value(pl) : 0.0);
    }
  } else {
    throw ValidationError(origin + ": unsupported PLY format '" + format + "'");
  }
  return cloud;
}

// ---------------------------------------------------------------------------

std::string format_transform(const RegistrationSummary& reg) {
  const Mat4 m = reg.transform.matrix();
  std::ostringstream out;
  out << "# similarity transform, reconstruction -> CT (mm):\n"
         "#   x_ct = M * [x_recon; 1], M = [scale * R, t; 0 0 0 1], rows below\n";
  for (int r = 0; r < 4; ++r) out << "row" << r << " = " << matrix_row(m, r) << "\n";
  out << "scale = " << format_double(reg.transform.scale()) << "\n";
  out << "rms_mm = " << format_double(reg.rms) << "\n";
  out << "iterations = " << reg.iterations << "\n";
  out << "converged = " << (reg.converged ? "true" : "false") << "\n";
  return out.str();
}

RegistrationSummary parse_transform(const std::string& text, const std::string& origin) {
  const KeyValues kv = parse_key_values(text, origin);
  RegistrationSummary reg;
  reg.transform = similarity_from_rows(kv, "", origin);
  if (kv.count("rms_mm")) reg.rms = kv_double(kv, "rms_mm", origin);
  if (kv.count("iterations")) reg.iterations = kv_int(kv, "iterations", origin);
  if (auto it = kv.find("converged"); it != kv.end()) reg.converged = it->second == "true";
  return reg;
}

std::string format_report(const MetricsReport& r) {
  std::ostringstream out;
  out << "# segmented reconstruction metrics\n"
         "# distances in mm (reconstruction -> CT), percentages in [0, 100]\n";
  out << "coverage_pct = " << format_double(r.coverage_pct) << "\n";
  out << "coverage_threshold_mm = " << format_double(r.coverage_threshold_mm) << "\n";
  out << "median_closest_mm = " << format_double(r.median_closest_mm) << "\n";
  out << "chamfer_one_sided_mm = " << format_double(r.chamfer_one_sided_mm) << "\n";
  out << "hausdorff_one_sided_mm = " << format_double(r.hausdorff_one_sided_mm) << "\n";
  out << "seg_precision_pct = "
      << (r.seg_precision_pct ? format_double(*r.seg_precision_pct) : std::string("undefined"))
      << "\n";
  out << "precision_policy = " << to_string(r.precision_policy) << "\n";
  out << "recon_points = " << r.recon_points << "\n";
  out << "ct_points = " << r.ct_points << "\n";
  out << "tumor_points = " << r.precision.tumor_points << "\n";
  out << "projected_hits = " << r.precision.hits << "\n";
  out << "projected_valid = " << r.precision.valid << "\n";
  out << "projected_excluded = " << r.precision.excluded << "\n";
  const Mat4 m = r.registration.transform.matrix();
  for (int i = 0; i < 4; ++i) out << "registration_row" << i << " = " << matrix_row(m, i) << "\n";
  out << "registration_scale = " << format_double(r.registration.transform.scale()) << "\n";
  out << "registration_rms_mm = " << format_double(r.registration.rms) << "\n";
  out << "registration_iterations = " << r.registration.iterations << "\n";
  out << "registration_converged = " << (r.registration.converged ? "true" : "false") << "\n";
  return out.str();
}

MetricsReport parse_report(const std::string& text, const std::string& origin) {
  const KeyValues kv = parse_key_values(text, origin);
  MetricsReport r;
  r.coverage_pct = kv_double(kv, "coverage_pct", origin);
  r.coverage_threshold_mm = kv_double(kv, "coverage_threshold_mm", origin);
  r.median_closest_mm = kv_double(kv, "median_closest_mm", origin);
  r.chamfer_one_sided_mm = kv_double(kv, "chamfer_one_sided_mm", origin);
  r.hausdorff_one_sided_mm = kv_double(kv, "hausdorff_one_sided_mm", origin);
  if (auto it = kv.find("seg_precision_pct"); it != kv.end() && it->second != "undefined") {
    r.seg_precision_pct = kv_double(kv, "seg_precision_pct", origin);
  }
  if (auto it = kv.find("precision_policy"); it != kv.end()) {
    r.precision_policy = precision_policy_from_string(it->second);
  }
  r.recon_points = std::size_t(kv_int(kv, "recon_points", origin));
  r.ct_points = std::size_t(kv_int(kv, "ct_points", origin));
  r.precision.tumor_points = std::size_t(kv_int(kv, "tumor_points", origin));
  r.precision.hits = std::size_t(kv_int(kv, "projected_hits", origin));
  r.precision.valid = std::size_t(kv_int(kv, "projected_valid", origin));
  r.precision.excluded = std::size_t(kv_int(kv, "projected_excluded", origin));
  r.registration.transform = similarity_from_rows(kv, "registration_", origin);
  r.registration.rms = kv_double(kv, "registration_rms_mm", origin);
  r.registration.iterations = kv_int(kv, "registration_iterations", origin);
  r.registration.converged = kv.count("registration_converged") &&
                             kv.at("registration_converged") == "true";
  return r;
}

// ---------------------------------------------------------------------------

std::string frame_file_stem(std::int64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(id));
  return buf;
}

fs::path DatasetPaths::depth(std::int64_t id) const {
  return depth_dir() / (frame_file_stem(id) + ".pfm");
}

fs::path DatasetPaths::mask(std::int64_t id) const {
  return mask_dir() / (frame_file_stem(id) + ".pgm");
}

namespace {

// Frame ids of `dir/*.ext`; non-numeric stems are reported as problems.
std::set<std::int64_t> list_frame_files(const fs::path& dir, const std::string& ext,
                                        std::vector<std::string>& problems) {
  std::set<std::int64_t> ids;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    problems.push_back(dir.string() + ": missing directory");
    return ids;
  }
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir, ec)) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  for (const auto& p : entries) {
    if (p.extension() != ext) continue;
    const std::string stem = p.stem().string();
    std::int64_t id = 0;
    auto [ptr, err] = std::from_chars(stem.data(), stem.data() + stem.size(), id);
    if (err != std::errc() || ptr != stem.data() + stem.size() || id < 0) {
      problems.push_back(p.string() + ": file name is not a frame id");
      continue;
    }
    ids.insert(id);
  }
  return ids;
}

std::string join_ids(const std::vector<std::int64_t>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size() && i < 20; ++i) {
    if (i) s += ", ";
    s += std::to_string(ids[i]);
  }
  if (ids.size() > 20) s += ", ... (" + std::to_string(ids.size()) + " total)";
  return s;
}

void compare_ids(const std::vector<PoseEntry>& poses, const std::set<std::int64_t>& files,
                 const std::string& what, std::vector<std::string>& problems) {
  std::set<std::int64_t> pose_ids;
  for (const auto& p : poses) pose_ids.insert(p.frame_id);
  std::vector<std::int64_t> missing, extra;
  std::set_difference(pose_ids.begin(), pose_ids.end(), files.begin(), files.end(),
                      std::back_inserter(missing));
  std::set_difference(files.begin(), files.end(), pose_ids.begin(), pose_ids.end(),
                      std::back_inserter(extra));
  if (!missing.empty()) {
    problems.push_back(what + ": no file for frame ids " + join_ids(missing));
  }
  if (!extra.empty()) {
    problems.push_back(what + ": files without a pose for frame ids " + join_ids(extra));
  }
}

struct LayoutCheck {
  std::optional<DatasetCamera> camera;
  std::vector<PoseEntry> poses;
  std::vector<std::string> problems;
};

LayoutCheck check_layout(const fs::path& root) {
  LayoutCheck lc;
  const DatasetPaths paths{root};
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    lc.problems.push_back(root.string() + ": not a directory");
    return lc;
  }
  try {
    lc.camera = parse_camera(read_key_values(paths.intrinsics()), paths.intrinsics().string());
  } catch (const Error& e) {
    lc.problems.push_back(e.what());
  }
  try {
    lc.poses = parse_poses(read_file(paths.poses()), paths.poses().string());
    if (lc.poses.empty()) lc.problems.push_back(paths.poses().string() + ": no poses");
  } catch (const Error& e) {
    lc.problems.push_back(e.what());
  }
  const auto depth_ids = list_frame_files(paths.depth_dir(), ".pfm", lc.problems);
  const auto mask_ids = list_frame_files(paths.mask_dir(), ".pgm", lc.problems);
  if (!lc.poses.empty()) {
    compare_ids(lc.poses, depth_ids, paths.depth_dir().string(), lc.problems);
    compare_ids(lc.poses, mask_ids, paths.mask_dir().string(), lc.problems);
  }
  return lc;
}

std::string problems_text(const std::vector<std::string>& problems) {
  std::string s = "invalid dataset:";
  for (const auto& p : problems) s += "\n  " + p;
  return s;
}

InverseDepthMap load_depth(const DatasetPaths& paths, const DatasetCamera& cam, std::int64_t id) {
  const fs::path file = paths.depth(id);
  InverseDepthMap d = decode_pfm(read_file(file), file.string());
  if (d.width != cam.inv_depth_width() || d.height != cam.inv_depth_height()) {
    throw ValidationError(file.string() + ": size " + std::to_string(d.width) + "x" +
                          std::to_string(d.height) + " does not match declared depth size " +
                          std::to_string(cam.inv_depth_width()) + "x" +
                          std::to_string(cam.inv_depth_height()));
  }
  return d;
}

SegmentationMask load_mask(const DatasetPaths& paths, const DatasetCamera& cam, std::int64_t id) {
  const fs::path file = paths.mask(id);
  SegmentationMask m = decode_mask_pgm(read_file(file), file.string());
  if (m.width != cam.raw.width || m.height != cam.raw.height) {
    throw ValidationError(file.string() + ": size " + std::to_string(m.width) + "x" +
                          std::to_string(m.height) + " does not match camera size " +
                          std::to_string(cam.raw.width) + "x" + std::to_string(cam.raw.height));
  }
  return m;
}

}  // namespace

ValidationReport validate_dataset(const fs::path& root) {
  LayoutCheck lc = check_layout(root);
  ValidationReport report;
  report.frames = lc.poses.size();
  if (lc.camera) {
    const DatasetPaths paths{root};
    for (const auto& e : lc.poses) {
      std::error_code ec;
      if (fs::exists(paths.depth(e.frame_id), ec)) {
        try {
          const InverseDepthMap d = load_depth(paths, *lc.camera, e.frame_id);
          (void)d;
        } catch (const Error& err) {
          lc.problems.push_back(err.what());
        }
      }
      if (fs::exists(paths.mask(e.frame_id), ec)) {
        try {
          (void)load_mask(paths, *lc.camera, e.frame_id);
        } catch (const Error& err) {
          lc.problems.push_back(err.what());
        }
      }
    }
    std::error_code ec;
    if (fs::exists(paths.ct(), ec)) {
      try {
        const LabeledPointCloud ct = decode_ply(read_file(paths.ct()), paths.ct().string());
        if (ct.empty()) lc.problems.push_back(paths.ct().string() + ": empty point cloud");
      } catch (const Error& err) {
        lc.problems.push_back(err.what());
      }
    }
  }
  report.problems = std::move(lc.problems);
  return report;
}

std::vector<KeyframeRecord> load_keyframes(const fs::path& root, int frame_stride) {
  if (frame_stride < 1) throw ValidationError("frame stride must be >= 1");
  LayoutCheck lc = check_layout(root);
  if (!lc.problems.empty()) throw ValidationError(problems_text(lc.problems));
  const DatasetPaths paths{root};
  const DatasetCamera& cam = *lc.camera;
  const CameraIntrinsics frame = cam.frame();
  std::optional<PixelMap> map;
  if (cam.needs_mask_remap()) map = build_undistort_map(cam.raw, frame);

  std::vector<KeyframeRecord> out;
  for (std::size_t i = 0; i < lc.poses.size(); i += std::size_t(frame_stride)) {
    const PoseEntry& e = lc.poses[i];
    KeyframeRecord rec;
    rec.frame_id = e.frame_id;
    rec.intrinsics = frame;
    rec.pose = e.pose;
    rec.inv_depth = load_depth(paths, cam, e.frame_id);
    SegmentationMask raw = load_mask(paths, cam, e.frame_id);
    rec.mask = map ? remap_nearest(raw, *map) : std::move(raw);
    out.push_back(std::move(rec));
  }
  return out;
}

void write_dataset(const fs::path& root, const DatasetCamera& camera,
                   const std::vector<KeyframeRecord>& frames, const LabeledPointCloud* ct) {
  const DatasetPaths paths{root};
  std::error_code ec;
  fs::create_directories(paths.depth_dir(), ec);
  fs::create_directories(paths.mask_dir(), ec);
  if (ec) throw IoError("cannot create dataset directories under " + root.string());
  write_file_atomic(paths.intrinsics(), format_camera(camera));
  std::vector<PoseEntry> poses;
  for (const auto& f : frames) {
    poses.push_back({f.frame_id, f.pose});
    write_file_atomic(paths.depth(f.frame_id), encode_pfm(f.inv_depth));
    write_file_atomic(paths.mask(f.frame_id), encode_mask_pgm(f.mask));
  }
  write_file_atomic(paths.poses(), format_poses(poses));
  if (ct) write_file_atomic(paths.ct(), encode_labeled_ply(*ct));
}

}  // namespace airseg::io
