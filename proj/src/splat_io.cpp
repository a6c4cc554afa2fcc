#include "splatdiff/splat_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include <Eigen/Geometry>
#include <json.hpp>

#include "splatdiff/errors.hpp"

namespace splatdiff {
namespace {

enum class PlyFormat { ascii, binary_le, binary_be };

enum class ScalarType { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<ScalarType> scalar_type_from(std::string_view name) {
  static const std::map<std::string_view, ScalarType> kTypes = {
      {"char", ScalarType::i8},    {"int8", ScalarType::i8},
      {"uchar", ScalarType::u8},   {"uint8", ScalarType::u8},
      {"short", ScalarType::i16},  {"int16", ScalarType::i16},
      {"ushort", ScalarType::u16}, {"uint16", ScalarType::u16},
      {"int", ScalarType::i32},    {"int32", ScalarType::i32},
      {"uint", ScalarType::u32},   {"uint32", ScalarType::u32},
      {"float", ScalarType::f32},  {"float32", ScalarType::f32},
      {"double", ScalarType::f64}, {"float64", ScalarType::f64},
  };
  auto it = kTypes.find(name);
  if (it == kTypes.end()) return std::nullopt;
  return it->second;
}

std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::i8:
    case ScalarType::u8:
      return 1;
    case ScalarType::i16:
    case ScalarType::u16:
      return 2;
    case ScalarType::i32:
    case ScalarType::u32:
    case ScalarType::f32:
      return 4;
    case ScalarType::f64:
      return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  ScalarType type = ScalarType::f32;
  bool is_list = false;
  ScalarType count_type = ScalarType::u8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

struct PlyHeader {
  PlyFormat format = PlyFormat::binary_le;
  std::vector<PlyElement> elements;
  std::size_t payload_offset = 0;
};

PlyHeader parse_header(std::span<const std::uint8_t> bytes) {
  const std::string_view all(reinterpret_cast<const char*>(bytes.data()),
                             bytes.size());
  const std::size_t end = all.find("end_header");
  if (all.substr(0, 3) != "ply" || end == std::string_view::npos) {
    throw FormatError("not a PLY file (missing magic or end_header)");
  }
  std::size_t payload = all.find('\n', end);
  if (payload == std::string_view::npos) {
    throw FormatError("PLY header is not newline terminated");
  }
  PlyHeader header;
  header.payload_offset = payload + 1;

  std::istringstream lines{std::string(all.substr(0, end))};
  std::string line;
  bool have_format = false;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream tokens(line);
    std::string keyword;
    tokens >> keyword;
    if (keyword == "format") {
      std::string fmt;
      tokens >> fmt;
      if (fmt == "ascii") {
        header.format = PlyFormat::ascii;
      } else if (fmt == "binary_little_endian") {
        header.format = PlyFormat::binary_le;
      } else if (fmt == "binary_big_endian") {
        header.format = PlyFormat::binary_be;
      } else {
        throw FormatError("unknown PLY format " + fmt);
      }
      have_format = true;
    } else if (keyword == "element") {
      PlyElement element;
      tokens >> element.name >> element.count;
      if (tokens.fail()) throw FormatError("malformed element line: " + line);
      header.elements.push_back(std::move(element));
    } else if (keyword == "property") {
      if (header.elements.empty()) {
        throw FormatError("property declared before any element");
      }
      PlyProperty prop;
      std::string type_name;
      tokens >> type_name;
      if (type_name == "list") {
        std::string count_name, item_name;
        tokens >> count_name >> item_name >> prop.name;
        auto ct = scalar_type_from(count_name);
        auto it = scalar_type_from(item_name);
        if (!ct || !it) throw FormatError("unknown list type in: " + line);
        prop.is_list = true;
        prop.count_type = *ct;
        prop.type = *it;
      } else {
        auto t = scalar_type_from(type_name);
        if (!t) throw FormatError("unknown property type " + type_name);
        prop.type = *t;
        tokens >> prop.name;
      }
      if (prop.name.empty()) throw FormatError("property without a name");
      header.elements.back().properties.push_back(std::move(prop));
    }
    // "ply", "comment", "obj_info" need no handling.
  }
  if (!have_format) throw FormatError("PLY header has no format line");
  return header;
}

class BinaryCursor {
 public:
  BinaryCursor(std::span<const std::uint8_t> bytes, std::size_t offset,
               bool big_endian)
      : bytes_(bytes), offset_(offset), big_endian_(big_endian) {}

  double read(ScalarType t) {
    const std::size_t n = type_size(t);
    if (offset_ + n > bytes_.size()) {
      throw LengthError("PLY payload truncated at byte " +
                        std::to_string(offset_));
    }
    std::uint8_t buf[8];
    std::memcpy(buf, bytes_.data() + offset_, n);
    offset_ += n;
    if (big_endian_ != (std::endian::native == std::endian::big)) {
      std::reverse(buf, buf + n);
    }
    switch (t) {
      case ScalarType::i8: return load<std::int8_t>(buf);
      case ScalarType::u8: return load<std::uint8_t>(buf);
      case ScalarType::i16: return load<std::int16_t>(buf);
      case ScalarType::u16: return load<std::uint16_t>(buf);
      case ScalarType::i32: return load<std::int32_t>(buf);
      case ScalarType::u32: return load<std::uint32_t>(buf);
      case ScalarType::f32: return load<float>(buf);
      case ScalarType::f64: return load<double>(buf);
    }
    return 0.0;
  }

 private:
  template <typename T>
  static double load(const std::uint8_t* buf) {
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return static_cast<double>(v);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t offset_;
  bool big_endian_;
};

class AsciiCursor {
 public:
  AsciiCursor(std::span<const std::uint8_t> bytes, std::size_t offset)
      : stream_(std::string(reinterpret_cast<const char*>(bytes.data()) + offset,
                            bytes.size() - offset)) {}

  double read(ScalarType) {
    double v = 0.0;
    if (!(stream_ >> v)) throw LengthError("PLY ascii payload truncated");
    return v;
  }

 private:
  std::istringstream stream_;
};

// Column indices of the required fields within the vertex element.
struct VertexLayout {
  std::array<int, 3> position{};
  std::array<int, 3> dc{};
  int opacity = -1;
  std::array<int, 3> scale{};
  std::array<int, 4> rot{};
  std::vector<std::pair<int, int>> rest;  // (f_rest index, column)
};

VertexLayout resolve_layout(const PlyElement& vertex) {
  std::map<std::string, int> columns;
  for (std::size_t i = 0; i < vertex.properties.size(); ++i) {
    const auto& p = vertex.properties[i];
    if (p.is_list) continue;
    columns[p.name] = static_cast<int>(i);
  }
  auto require = [&](const std::string& name) {
    auto it = columns.find(name);
    if (it == columns.end()) throw FormatError("missing property " + name);
    return it->second;
  };
  VertexLayout layout;
  const char* xyz[] = {"x", "y", "z"};
  for (int k = 0; k < 3; ++k) layout.position[k] = require(xyz[k]);
  for (int k = 0; k < 3; ++k) layout.dc[k] = require("f_dc_" + std::to_string(k));
  layout.opacity = require("opacity");
  for (int k = 0; k < 3; ++k) layout.scale[k] = require("scale_" + std::to_string(k));
  for (int k = 0; k < 4; ++k) layout.rot[k] = require("rot_" + std::to_string(k));
  for (const auto& [name, col] : columns) {
    if (name.rfind("f_rest_", 0) == 0) {
      try {
        layout.rest.emplace_back(std::stoi(name.substr(7)), col);
      } catch (const std::exception&) {
        throw FormatError("bad f_rest property name " + name);
      }
    }
  }
  std::sort(layout.rest.begin(), layout.rest.end());
  for (std::size_t k = 0; k < layout.rest.size(); ++k) {
    if (layout.rest[k].first != static_cast<int>(k)) {
      throw FormatError("f_rest properties are not contiguous from 0");
    }
  }
  return layout;
}

template <typename Cursor>
std::vector<RawSplatRecord> read_elements(const PlyHeader& header,
                                          Cursor& cursor) {
  std::vector<RawSplatRecord> records;
  bool found_vertex = false;
  for (const auto& element : header.elements) {
    const bool is_vertex = element.name == "vertex";
    std::optional<VertexLayout> layout;
    if (is_vertex) {
      layout = resolve_layout(element);
      found_vertex = true;
      records.reserve(element.count);
    }
    std::vector<double> row(element.properties.size());
    for (std::size_t n = 0; n < element.count; ++n) {
      for (std::size_t p = 0; p < element.properties.size(); ++p) {
        const auto& prop = element.properties[p];
        if (prop.is_list) {
          const auto len = static_cast<std::size_t>(cursor.read(prop.count_type));
          for (std::size_t k = 0; k < len; ++k) cursor.read(prop.type);
          row[p] = 0.0;
        } else {
          row[p] = cursor.read(prop.type);
        }
      }
      if (!is_vertex) continue;
      RawSplatRecord r;
      for (int k = 0; k < 3; ++k) {
        r.position(k) = row[layout->position[k]];
        r.sh_dc(k) = row[layout->dc[k]];
        r.log_scales(k) = row[layout->scale[k]];
      }
      for (int k = 0; k < 4; ++k) r.rotation_wxyz[k] = row[layout->rot[k]];
      r.opacity_logit = row[layout->opacity];
      r.sh_rest.reserve(layout->rest.size());
      for (const auto& [idx, col] : layout->rest) r.sh_rest.push_back(row[col]);
      const auto& q = r.rotation_wxyz;
      if (q[0] == 0.0 && q[1] == 0.0 && q[2] == 0.0 && q[3] == 0.0) {
        throw ValidationError("vertex " + std::to_string(n) +
                              " has a zero quaternion");
      }
      records.push_back(std::move(r));
    }
    if (is_vertex) break;  // trailing elements are irrelevant
  }
  if (!found_vertex) throw FormatError("PLY has no vertex element");
  return records;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

void append_f32(std::vector<std::uint8_t>& out, double value) {
  const auto f = static_cast<float>(value);
  std::uint8_t buf[4];
  std::memcpy(buf, &f, 4);
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + 4);
  out.insert(out.end(), buf, buf + 4);
}

void validate_camera(const CameraRecord& c) {
  if (c.width <= 0 || c.height <= 0) {
    throw ValidationError("camera " + std::to_string(c.id) +
                          " has non-positive image size");
  }
  if (!(c.fx > 0.0) || !(c.fy > 0.0)) {
    throw ValidationError("camera " + std::to_string(c.id) +
                          " has non-positive focal length");
  }
}

}  // namespace

std::vector<RawSplatRecord> parse_splat_ply(std::span<const std::uint8_t> bytes) {
  const PlyHeader header = parse_header(bytes);
  if (header.format == PlyFormat::ascii) {
    AsciiCursor cursor(bytes, header.payload_offset);
    return read_elements(header, cursor);
  }
  BinaryCursor cursor(bytes, header.payload_offset,
                      header.format == PlyFormat::binary_be);
  return read_elements(header, cursor);
}

std::vector<RawSplatRecord> read_splat_ply(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_splat_ply(bytes);
}

std::vector<std::uint8_t> encode_splat_ply(std::span<const RawSplatRecord> records) {
  const std::size_t rest = records.empty() ? 0 : records.front().sh_rest.size();
  for (const auto& r : records) {
    if (r.sh_rest.size() != rest) {
      throw ValidationError("records disagree on the number of f_rest coefficients");
    }
  }
  std::ostringstream h;
  h << "ply\nformat binary_little_endian 1.0\n"
    << "element vertex " << records.size() << "\n";
  for (const char* name : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"}) {
    h << "property float " << name << "\n";
  }
  for (std::size_t k = 0; k < rest; ++k) h << "property float f_rest_" << k << "\n";
  h << "property float opacity\n";
  for (int k = 0; k < 3; ++k) h << "property float scale_" << k << "\n";
  for (int k = 0; k < 4; ++k) h << "property float rot_" << k << "\n";
  h << "end_header\n";
  const std::string head = h.str();

  std::vector<std::uint8_t> out(head.begin(), head.end());
  out.reserve(out.size() + records.size() * 4 * (17 + rest));
  for (const auto& r : records) {
    for (int k = 0; k < 3; ++k) append_f32(out, r.position(k));
    for (int k = 0; k < 3; ++k) append_f32(out, 0.0);
    for (int k = 0; k < 3; ++k) append_f32(out, r.sh_dc(k));
    for (double v : r.sh_rest) append_f32(out, v);
    append_f32(out, r.opacity_logit);
    for (int k = 0; k < 3; ++k) append_f32(out, r.log_scales(k));
    for (double v : r.rotation_wxyz) append_f32(out, v);
  }
  return out;
}

void write_splat_ply(std::span<const RawSplatRecord> records,
                     const std::filesystem::path& path) {
  const auto bytes = encode_splat_ply(records);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Mat3 rotation_from_quaternion(double w, double x, double y, double z) {
  // Unnormalized rotation formula; a non-unit q yields a scaled matrix whose
  // orthonormality defect is checked before normalizing.
  Mat3 raw;
  raw << w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z;
  const double defect = (raw.transpose() * raw - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(defect <= 1e-4)) {
    throw ValidationError("camera pose rotation is not orthonormal (defect " +
                          std::to_string(defect) + ")");
  }
  Eigen::Quaterniond q(w, x, y, z);
  q.normalize();
  return q.toRotationMatrix();
}

std::vector<CameraRecord> parse_cameras_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("camera JSON: ") + e.what());
  }
  if (!doc.contains("cameras") || !doc["cameras"].is_array()) {
    throw FormatError("camera JSON lacks a \"cameras\" array");
  }
  std::vector<CameraRecord> cameras;
  for (const auto& j : doc["cameras"]) {
    try {
      CameraRecord c;
      c.id = j.at("id").get<std::int64_t>();
      c.width = j.at("width").get<int>();
      c.height = j.at("height").get<int>();
      c.fx = j.at("fx").get<double>();
      c.fy = j.at("fy").get<double>();
      c.cx = j.at("cx").get<double>();
      c.cy = j.at("cy").get<double>();
      const auto q = j.at("q_wxyz").get<std::vector<double>>();
      const auto t = j.at("t").get<std::vector<double>>();
      if (q.size() != 4 || t.size() != 3) {
        throw FormatError("camera " + std::to_string(c.id) +
                          ": q_wxyz needs 4 values and t needs 3");
      }
      c.rotation = rotation_from_quaternion(q[0], q[1], q[2], q[3]);
      c.translation = Vec3(t[0], t[1], t[2]);
      validate_camera(c);
      cameras.push_back(c);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("camera JSON: ") + e.what());
    }
  }
  return cameras;
}

std::vector<CameraRecord> parse_colmap_text(std::string_view cameras_txt,
                                            std::string_view images_txt) {
  struct Intrinsics {
    int width, height;
    double fx, fy, cx, cy;
  };
  std::map<std::int64_t, Intrinsics> intrinsics;
  {
    std::istringstream in{std::string(cameras_txt)};
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream row(line);
      std::int64_t id;
      std::string model;
      Intrinsics k{};
      if (!(row >> id >> model >> k.width >> k.height)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        throw FormatError("malformed cameras.txt line: " + line);
      }
      if (model == "PINHOLE") {
        row >> k.fx >> k.fy >> k.cx >> k.cy;
      } else if (model == "SIMPLE_PINHOLE") {
        row >> k.fx >> k.cx >> k.cy;
        k.fy = k.fx;
      } else {
        throw UnsupportedError("unsupported COLMAP camera model " + model);
      }
      if (row.fail()) throw FormatError("malformed cameras.txt line: " + line);
      intrinsics[id] = k;
    }
  }

  std::vector<CameraRecord> cameras;
  std::istringstream in{std::string(images_txt)};
  std::string line;
  bool expect_points = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    if (expect_points) {
      // Second line of each image entry lists 2D observations; may be empty.
      expect_points = false;
      continue;
    }
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    std::int64_t image_id, camera_id;
    double qw, qx, qy, qz, tx, ty, tz;
    if (!(row >> image_id >> qw >> qx >> qy >> qz >> tx >> ty >> tz >> camera_id)) {
      throw FormatError("malformed images.txt line: " + line);
    }
    auto it = intrinsics.find(camera_id);
    if (it == intrinsics.end()) {
      throw FormatError("images.txt references unknown camera " +
                        std::to_string(camera_id));
    }
    CameraRecord c;
    c.id = image_id;
    c.width = it->second.width;
    c.height = it->second.height;
    c.fx = it->second.fx;
    c.fy = it->second.fy;
    c.cx = it->second.cx;
    c.cy = it->second.cy;
    c.rotation = rotation_from_quaternion(qw, qx, qy, qz);
    c.translation = Vec3(tx, ty, tz);
    validate_camera(c);
    cameras.push_back(c);
    expect_points = true;
  }
  return cameras;
}

std::vector<CameraRecord> read_cameras(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) {
    return parse_colmap_text(read_text(path / "cameras.txt"),
                             read_text(path / "images.txt"));
  }
  return parse_cameras_json(read_text(path));
}

std::string encode_cameras_json(std::span<const CameraRecord> cameras) {
  nlohmann::json doc;
  doc["cameras"] = nlohmann::json::array();
  for (const auto& c : cameras) {
    Eigen::Quaterniond q(c.rotation);
    if (q.w() < 0) q.coeffs() *= -1.0;
    doc["cameras"].push_back({{"id", c.id},
                              {"width", c.width},
                              {"height", c.height},
                              {"fx", c.fx},
                              {"fy", c.fy},
                              {"cx", c.cx},
                              {"cy", c.cy},
                              {"q_wxyz", {q.w(), q.x(), q.y(), q.z()}},
                              {"t", {c.translation.x(), c.translation.y(),
                                     c.translation.z()}}});
  }
  return doc.dump(2) + "\n";
}

void write_cameras_json(std::span<const CameraRecord> cameras,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << encode_cameras_json(cameras);
}

std::string format_score_table(std::span<const ScoreRow> rows) {
  std::ostringstream out;
  out << "primitive_id,delta_geo,delta_app,omega,delta_combined\n";
  out << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.primitive_id << ',' << r.delta_geo << ',' << r.delta_app << ','
        << r.omega << ',' << r.delta_combined << '\n';
  }
  return out.str();
}

void write_score_table(std::span<const ScoreRow> rows,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_score_table(rows);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace splatdiff
