#include "neofcam/point_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string_view>
#include <unordered_map>

namespace neofcam {
namespace {

enum class ScalarType { i8, u8, i16, u16, i32, u32, f32, f64 };

std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::i8:
    case ScalarType::u8: return 1;
    case ScalarType::i16:
    case ScalarType::u16: return 2;
    case ScalarType::i32:
    case ScalarType::u32:
    case ScalarType::f32: return 4;
    case ScalarType::f64: return 8;
  }
  return 0;
}

ScalarType parse_type(const std::string& name, const std::filesystem::path& path) {
  static const std::unordered_map<std::string, ScalarType> table{
      {"char", ScalarType::i8},     {"int8", ScalarType::i8},
      {"uchar", ScalarType::u8},    {"uint8", ScalarType::u8},
      {"short", ScalarType::i16},   {"int16", ScalarType::i16},
      {"ushort", ScalarType::u16},  {"uint16", ScalarType::u16},
      {"int", ScalarType::i32},     {"int32", ScalarType::i32},
      {"uint", ScalarType::u32},    {"uint32", ScalarType::u32},
      {"float", ScalarType::f32},   {"float32", ScalarType::f32},
      {"double", ScalarType::f64},  {"float64", ScalarType::f64},
  };
  const auto it = table.find(name);
  if (it == table.end())
    throw IoError(path.string() + ": unknown PLY property type '" + name + "'");
  return it->second;
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

enum class PlyFormat { ascii, binary_le, binary_be };

struct PlyHeader {
  PlyFormat format = PlyFormat::ascii;
  std::vector<PlyElement> elements;
  std::size_t body_offset = 0;
};

PlyHeader parse_header(const std::string& data, const std::filesystem::path& path) {
  PlyHeader header;
  std::size_t pos = 0;
  bool saw_format = false;
  auto next_line = [&]() -> std::string {
    const std::size_t end = data.find('\n', pos);
    if (end == std::string::npos) throw IoError(path.string() + ": truncated PLY header");
    std::string line = data.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  if (next_line() != "ply") throw IoError(path.string() + ": missing 'ply' magic");
  while (true) {
    const std::string line = next_line();
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword.empty() || keyword == "comment" || keyword == "obj_info") continue;
    if (keyword == "end_header") break;
    if (keyword == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") header.format = PlyFormat::ascii;
      else if (fmt == "binary_little_endian") header.format = PlyFormat::binary_le;
      else if (fmt == "binary_big_endian") header.format = PlyFormat::binary_be;
      else throw IoError(path.string() + ": unsupported PLY format '" + fmt + "'");
      saw_format = true;
    } else if (keyword == "element") {
      PlyElement el;
      ls >> el.name >> el.count;
      if (!ls) throw IoError(path.string() + ": malformed element line");
      header.elements.push_back(std::move(el));
    } else if (keyword == "property") {
      if (header.elements.empty())
        throw IoError(path.string() + ": property before any element");
      PlyProperty prop;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> prop.name;
        prop.is_list = true;
        prop.count_type = parse_type(count_type, path);
        prop.type = parse_type(item_type, path);
      } else {
        prop.type = parse_type(type, path);
        ls >> prop.name;
      }
      if (prop.name.empty()) throw IoError(path.string() + ": malformed property line");
      header.elements.back().properties.push_back(std::move(prop));
    } else {
      throw IoError(path.string() + ": unexpected PLY header keyword '" + keyword + "'");
    }
  }
  if (!saw_format) throw IoError(path.string() + ": PLY header lacks a format line");
  header.body_offset = pos;
  return header;
}

class PlyBodyReader {
 public:
  PlyBodyReader(const std::string& data, std::size_t offset, PlyFormat format,
                const std::filesystem::path& path)
      : data_(data), pos_(offset), format_(format), path_(path) {}

  double read(ScalarType type) {
    if (format_ == PlyFormat::ascii) return read_ascii();
    const std::size_t n = type_size(type);
    if (pos_ + n > data_.size()) throw IoError(path_.string() + ": truncated PLY body");
    unsigned char buf[8];
    std::memcpy(buf, data_.data() + pos_, n);
    pos_ += n;
    const bool file_le = format_ == PlyFormat::binary_le;
    const bool host_le = std::endian::native == std::endian::little;
    if (file_le != host_le) std::reverse(buf, buf + n);
    switch (type) {
      case ScalarType::i8: { std::int8_t v; std::memcpy(&v, buf, 1); return v; }
      case ScalarType::u8: { std::uint8_t v; std::memcpy(&v, buf, 1); return v; }
      case ScalarType::i16: { std::int16_t v; std::memcpy(&v, buf, 2); return v; }
      case ScalarType::u16: { std::uint16_t v; std::memcpy(&v, buf, 2); return v; }
      case ScalarType::i32: { std::int32_t v; std::memcpy(&v, buf, 4); return v; }
      case ScalarType::u32: { std::uint32_t v; std::memcpy(&v, buf, 4); return v; }
      case ScalarType::f32: { float v; std::memcpy(&v, buf, 4); return v; }
      case ScalarType::f64: { double v; std::memcpy(&v, buf, 8); return v; }
    }
    return 0.0;
  }

 private:
  double read_ascii() {
    while (pos_ < data_.size() && std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
    if (pos_ >= data_.size()) throw IoError(path_.string() + ": truncated PLY body");
    const char* begin = data_.data() + pos_;
    const char* end = data_.data() + data_.size();
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc()) throw IoError(path_.string() + ": malformed number in PLY body");
    pos_ += static_cast<std::size_t>(ptr - begin);
    return value;
  }

  const std::string& data_;
  std::size_t pos_;
  PlyFormat format_;
  const std::filesystem::path& path_;
};

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void fan_triangulate(const std::vector<std::size_t>& poly,
                     std::vector<std::array<std::size_t, 3>>& out) {
  for (std::size_t t = 1; t + 1 < poly.size(); ++t) out.push_back({poly[0], poly[t], poly[t + 1]});
}

PointFile read_ply(const std::filesystem::path& path) {
  const std::string data = slurp(path);
  const PlyHeader header = parse_header(data, path);
  PlyBodyReader reader(data, header.body_offset, header.format, path);

  PointFile out;
  bool has_normals = false;
  for (const PlyElement& el : header.elements) {
    const bool is_vertex = el.name == "vertex";
    const bool is_face = el.name == "face";
    int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1, iface = -1;
    for (std::size_t p = 0; p < el.properties.size(); ++p) {
      const std::string& n = el.properties[p].name;
      const int pi = static_cast<int>(p);
      if (n == "x") ix = pi;
      else if (n == "y") iy = pi;
      else if (n == "z") iz = pi;
      else if (n == "nx") inx = pi;
      else if (n == "ny") iny = pi;
      else if (n == "nz") inz = pi;
      else if (n == "vertex_indices" || n == "vertex_index") iface = pi;
    }
    if (is_vertex) {
      if (ix < 0 || iy < 0 || iz < 0) throw IoError(path.string() + ": vertex element lacks x/y/z");
      has_normals = inx >= 0 && iny >= 0 && inz >= 0;
      out.vertices.reserve(el.count);
      if (has_normals) out.normals.reserve(el.count);
    }
    std::vector<double> scalars(el.properties.size());
    std::vector<std::size_t> list;
    for (std::size_t r = 0; r < el.count; ++r) {
      for (std::size_t p = 0; p < el.properties.size(); ++p) {
        const PlyProperty& prop = el.properties[p];
        if (prop.is_list) {
          const auto count = static_cast<std::size_t>(reader.read(prop.count_type));
          list.clear();
          for (std::size_t c = 0; c < count; ++c) {
            const double v = reader.read(prop.type);
            if (static_cast<int>(p) == iface) {
              if (v < 0) throw IoError(path.string() + ": negative face index");
              list.push_back(static_cast<std::size_t>(v));
            }
          }
          if (is_face && static_cast<int>(p) == iface) fan_triangulate(list, out.triangles);
        } else {
          scalars[p] = reader.read(prop.type);
        }
      }
      if (is_vertex) {
        out.vertices.emplace_back(scalars[ix], scalars[iy], scalars[iz]);
        if (has_normals) out.normals.emplace_back(scalars[inx], scalars[iny], scalars[inz]);
      }
    }
  }
  for (const auto& tri : out.triangles)
    for (std::size_t v : tri)
      if (v >= out.vertices.size()) throw IoError(path.string() + ": face index out of range");
  return out;
}

long parse_obj_index(std::string_view token, std::size_t count,
                     const std::filesystem::path& path) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || v == 0) throw IoError(path.string() + ": malformed OBJ face index");
  if (v < 0) v += static_cast<long>(count) + 1;
  if (v < 1 || v > static_cast<long>(count)) throw IoError(path.string() + ": OBJ index out of range");
  return v - 1;
}

PointFile read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  PointFile out;
  std::vector<Vec3> vn;
  std::vector<Vec3> vertex_normals;
  std::vector<bool> has_normal;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw IoError(path.string() + ": malformed vertex line");
      out.vertices.emplace_back(x, y, z);
      vertex_normals.emplace_back(Vec3::Zero());
      has_normal.push_back(false);
    } else if (tag == "vn") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw IoError(path.string() + ": malformed normal line");
      vn.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<std::size_t> poly;
      std::string tok;
      while (ls >> tok) {
        const std::string_view sv(tok);
        const std::size_t s1 = sv.find('/');
        const auto vi = static_cast<std::size_t>(
            parse_obj_index(sv.substr(0, s1), out.vertices.size(), path));
        poly.push_back(vi);
        if (s1 != std::string_view::npos) {
          const std::size_t s2 = sv.find('/', s1 + 1);
          if (s2 != std::string_view::npos && s2 + 1 < sv.size()) {
            const auto ni = static_cast<std::size_t>(
                parse_obj_index(sv.substr(s2 + 1), vn.size(), path));
            vertex_normals[vi] = vn[ni];
            has_normal[vi] = true;
          }
        }
      }
      fan_triangulate(poly, out.triangles);
    }
  }
  const bool all_normals =
      !out.vertices.empty() && std::all_of(has_normal.begin(), has_normal.end(), [](bool b) { return b; });
  if (all_normals) {
    out.normals = std::move(vertex_normals);
  } else if (vn.size() == out.vertices.size() && out.triangles.empty()) {
    // point-only OBJ with parallel v / vn lists
    out.normals = vn;
  }
  return out;
}

std::string lowercase_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

void write_header(std::ostream& os, const char* format, std::size_t n, bool normals, bool colors) {
  os << "ply\nformat " << format << " 1.0\nelement vertex " << n << "\n"
     << "property double x\nproperty double y\nproperty double z\n";
  if (normals) os << "property double nx\nproperty double ny\nproperty double nz\n";
  if (colors) os << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  os << "end_header\n";
}

void check_sizes(const std::vector<Vec3>& points, const std::vector<Vec3>* normals,
                 const std::vector<Rgb>* colors) {
  if (normals && normals->size() != points.size())
    throw InvalidArgument("write_ply: normal count differs from point count");
  if (colors && colors->size() != points.size())
    throw InvalidArgument("write_ply: color count differs from point count");
}

template <class T>
void put_le(std::string& buf, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native != std::endian::little) std::reverse(bytes, bytes + sizeof(T));
  buf.append(bytes, sizeof(T));
}

}  // namespace

PointFile read_point_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("file not found: '" + path.string() + "'");
  const std::string ext = lowercase_extension(path);
  if (ext == ".ply") return read_ply(path);
  if (ext == ".obj") return read_obj(path);
  throw IoError("unsupported point file extension '" + ext + "' (expected .ply or .obj)");
}

void write_ply(const std::filesystem::path& path, const std::vector<Vec3>& points,
               const std::vector<Vec3>* normals, const std::vector<Rgb>* colors) {
  check_sizes(points, normals, colors);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  write_header(os, "binary_little_endian", points.size(), normals != nullptr, colors != nullptr);
  std::string buf;
  buf.reserve(points.size() * 51);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (int a = 0; a < 3; ++a) put_le(buf, points[i][a]);
    if (normals)
      for (int a = 0; a < 3; ++a) put_le(buf, (*normals)[i][a]);
    if (colors) {
      put_le(buf, (*colors)[i].r);
      put_le(buf, (*colors)[i].g);
      put_le(buf, (*colors)[i].b);
    }
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

void write_ply_ascii(const std::filesystem::path& path, const std::vector<Vec3>& points,
                     const std::vector<Vec3>* normals, const std::vector<Rgb>* colors) {
  check_sizes(points, normals, colors);
  std::ofstream os(path);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  write_header(os, "ascii", points.size(), normals != nullptr, colors != nullptr);
  os.precision(17);
  for (std::size_t i = 0; i < points.size(); ++i) {
    os << points[i].x() << ' ' << points[i].y() << ' ' << points[i].z();
    if (normals) os << ' ' << (*normals)[i].x() << ' ' << (*normals)[i].y() << ' ' << (*normals)[i].z();
    if (colors)
      os << ' ' << int((*colors)[i].r) << ' ' << int((*colors)[i].g) << ' ' << int((*colors)[i].b);
    os << '\n';
  }
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<Rgb> read_ply_colors(const std::filesystem::path& path) {
  const std::string data = slurp(path);
  const PlyHeader header = parse_header(data, path);
  PlyBodyReader reader(data, header.body_offset, header.format, path);
  std::vector<Rgb> colors;
  for (const PlyElement& el : header.elements) {
    int ir = -1, ig = -1, ib = -1;
    for (std::size_t p = 0; p < el.properties.size(); ++p) {
      if (el.properties[p].name == "red") ir = static_cast<int>(p);
      if (el.properties[p].name == "green") ig = static_cast<int>(p);
      if (el.properties[p].name == "blue") ib = static_cast<int>(p);
    }
    std::vector<double> scalars(el.properties.size());
    for (std::size_t r = 0; r < el.count; ++r) {
      for (std::size_t p = 0; p < el.properties.size(); ++p) {
        const PlyProperty& prop = el.properties[p];
        if (prop.is_list) {
          const auto count = static_cast<std::size_t>(reader.read(prop.count_type));
          for (std::size_t c = 0; c < count; ++c) reader.read(prop.type);
        } else {
          scalars[p] = reader.read(prop.type);
        }
      }
      if (el.name == "vertex") {
        if (ir < 0 || ig < 0 || ib < 0) throw IoError(path.string() + ": vertex element has no colors");
        colors.push_back({static_cast<std::uint8_t>(scalars[ir]), static_cast<std::uint8_t>(scalars[ig]),
                          static_cast<std::uint8_t>(scalars[ib])});
      }
    }
  }
  return colors;
}

}  // namespace neofcam
