#include "nf/pointcloud/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>

namespace nf::pointcloud {

namespace fs = std::filesystem;

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const auto start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

Vec3 checked_normal(const Vec3& n, const fs::path& path, std::size_t line) {
  const double len = n.norm();
  if (!(len > 0.0)) throw ParseError(path.string(), line, "zero-length normal");
  return std::abs(len - 1.0) <= 1e-6 ? n : Vec3(n / len);
}

// Parses rows of whitespace-separated numbers; every row must have one of
// `allowed` column counts and all rows must agree. Blank lines and lines
// starting with '#' are skipped.
std::vector<std::vector<double>> read_rows(const fs::path& path,
                                           std::initializer_list<std::size_t> allowed,
                                           std::vector<std::size_t>* line_numbers) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tokens = split_ws(line);
    if (tokens.empty() || tokens.front().front() == '#') continue;
    if (std::find(allowed.begin(), allowed.end(), tokens.size()) == allowed.end()) {
      throw ParseError(path.string(), lineno,
                       "expected 3 or 6 values, got " + std::to_string(tokens.size()));
    }
    if (width == 0) width = tokens.size();
    if (tokens.size() != width) {
      throw ParseError(path.string(), lineno, "inconsistent column count");
    }
    std::vector<double> row;
    row.reserve(tokens.size());
    for (auto t : tokens) {
      const auto v = parse_double(t);
      if (!v) throw ParseError(path.string(), lineno, "invalid number '" + std::string(t) + "'");
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
    if (line_numbers) line_numbers->push_back(lineno);
  }
  if (rows.empty()) throw IoError(path.string() + ": file contains no points");
  return rows;
}

fs::path sidecar_path(const fs::path& path) {
  auto sidecar = path;
  sidecar.replace_extension(".normals");
  return sidecar;
}

PointCloud load_xyz(const fs::path& path) {
  std::vector<std::size_t> lines;
  const auto rows = read_rows(path, {3, 6}, &lines);
  std::vector<Vec3> points;
  points.reserve(rows.size());
  std::optional<std::vector<Vec3>> normals;
  if (rows.front().size() == 6) normals.emplace();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    points.emplace_back(r[0], r[1], r[2]);
    if (normals) normals->push_back(checked_normal(Vec3(r[3], r[4], r[5]), path, lines[i]));
  }
  if (!normals && fs::exists(sidecar_path(path))) {
    normals = load_normals(sidecar_path(path));
    if (normals->size() != points.size()) {
      throw IoError(sidecar_path(path).string() + ": row count does not match " +
                    path.string());
    }
  }
  return PointCloud(std::move(points), std::move(normals));
}

// ---------------------------------------------------------------- PLY

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<PlyType> ply_type(std::string_view s) {
  if (s == "char" || s == "int8") return PlyType::i8;
  if (s == "uchar" || s == "uint8") return PlyType::u8;
  if (s == "short" || s == "int16") return PlyType::i16;
  if (s == "ushort" || s == "uint16") return PlyType::u16;
  if (s == "int" || s == "int32") return PlyType::i32;
  if (s == "uint" || s == "uint32") return PlyType::u32;
  if (s == "float" || s == "float32") return PlyType::f32;
  if (s == "double" || s == "float64") return PlyType::f64;
  return std::nullopt;
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::i8:
    case PlyType::u8: return 1;
    case PlyType::i16:
    case PlyType::u16: return 2;
    case PlyType::i32:
    case PlyType::u32:
    case PlyType::f32: return 4;
    case PlyType::f64: return 8;
  }
  return 0;
}

template <typename T>
T read_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  return v;
}

double decode(PlyType t, const char* p) {
  switch (t) {
    case PlyType::i8: return read_le<std::int8_t>(p);
    case PlyType::u8: return read_le<std::uint8_t>(p);
    case PlyType::i16: return read_le<std::int16_t>(p);
    case PlyType::u16: return read_le<std::uint16_t>(p);
    case PlyType::i32: return read_le<std::int32_t>(p);
    case PlyType::u32: return read_le<std::uint32_t>(p);
    case PlyType::f32: return read_le<float>(p);
    case PlyType::f64: return read_le<double>(p);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type;
  bool is_list = false;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

struct PlyHeader {
  bool binary = false;
  std::vector<PlyElement> elements;
  std::vector<std::string> comments;
  std::size_t lines = 0;
};

PlyHeader read_ply_header(std::istream& in, const fs::path& path) {
  PlyHeader h;
  std::string line;
  std::getline(in, line);
  ++h.lines;
  if (line.rfind("ply", 0) != 0) throw ParseError(path.string(), 1, "missing 'ply' magic");
  bool saw_format = false;
  while (std::getline(in, line)) {
    ++h.lines;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") {
      if (!saw_format) throw ParseError(path.string(), h.lines, "missing format line");
      return h;
    }
    if (tok[0] == "comment" || tok[0] == "obj_info") {
      const auto pos = line.find(tok[0]) + tok[0].size();
      auto rest = line.substr(std::min(pos + 1, line.size()));
      if (tok[0] == "comment") h.comments.push_back(rest);
      continue;
    }
    if (tok[0] == "format" && tok.size() >= 2) {
      saw_format = true;
      if (tok[1] == "ascii") {
        h.binary = false;
      } else if (tok[1] == "binary_little_endian") {
        h.binary = true;
      } else {
        throw ParseError(path.string(), h.lines, "unsupported PLY format " + std::string(tok[1]));
      }
    } else if (tok[0] == "element" && tok.size() == 3) {
      std::size_t count = 0;
      const auto [p, ec] = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), count);
      if (ec != std::errc()) throw ParseError(path.string(), h.lines, "bad element count");
      h.elements.push_back({std::string(tok[1]), count, {}});
    } else if (tok[0] == "property" && !h.elements.empty()) {
      if (tok.size() == 5 && tok[1] == "list") {
        const auto t = ply_type(tok[3]);
        if (!t) throw ParseError(path.string(), h.lines, "unknown property type");
        h.elements.back().properties.push_back({std::string(tok[4]), *t, true});
      } else if (tok.size() == 3) {
        const auto t = ply_type(tok[1]);
        if (!t) throw ParseError(path.string(), h.lines, "unknown property type");
        h.elements.back().properties.push_back({std::string(tok[2]), *t, false});
      } else {
        throw ParseError(path.string(), h.lines, "malformed property line");
      }
    } else {
      throw ParseError(path.string(), h.lines, "unexpected header line");
    }
  }
  throw ParseError(path.string(), h.lines, "missing end_header");
}

struct PlyVertices {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<Rgb> colors;
};

PlyVertices read_ply_vertices(const fs::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  const auto header = read_ply_header(in, path);

  PlyVertices out;
  for (const auto& element : header.elements) {
    if (element.name != "vertex") {
      // Elements preceding the vertices would have to be skipped; only the
      // common layout with vertices first is supported.
      throw ParseError(path.string(), header.lines, "vertex element must come first");
    }
    auto find = [&](std::string_view name) -> int {
      for (std::size_t i = 0; i < element.properties.size(); ++i) {
        if (element.properties[i].name == name) return static_cast<int>(i);
      }
      return -1;
    };
    const int ix = find("x"), iy = find("y"), iz = find("z");
    if (ix < 0 || iy < 0 || iz < 0) {
      throw ParseError(path.string(), header.lines, "vertex element lacks x/y/z");
    }
    const int inx = find("nx"), iny = find("ny"), inz = find("nz");
    const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;
    const int ir = find("red"), ig = find("green"), ib = find("blue");
    const bool has_colors = ir >= 0 && ig >= 0 && ib >= 0;
    for (const auto& p : element.properties) {
      if (p.is_list) throw ParseError(path.string(), header.lines, "list property on vertex");
    }

    std::vector<double> values(element.properties.size());
    std::size_t record = 0;
    for (const auto& p : element.properties) record += ply_size(p.type);
    std::vector<char> buffer(record);
    std::string line;
    std::size_t lineno = header.lines;
    for (std::size_t v = 0; v < element.count; ++v) {
      if (header.binary) {
        if (!in.read(buffer.data(), static_cast<std::streamsize>(record))) {
          throw IoError(path.string() + ": truncated binary vertex data");
        }
        std::size_t offset = 0;
        for (std::size_t i = 0; i < values.size(); ++i) {
          values[i] = decode(element.properties[i].type, buffer.data() + offset);
          offset += ply_size(element.properties[i].type);
        }
      } else {
        do {
          if (!std::getline(in, line)) throw IoError(path.string() + ": truncated vertex data");
          ++lineno;
        } while (split_ws(line).empty());
        const auto tok = split_ws(line);
        if (tok.size() != values.size()) {
          throw ParseError(path.string(), lineno, "wrong number of vertex values");
        }
        for (std::size_t i = 0; i < values.size(); ++i) {
          const auto d = parse_double(tok[i]);
          if (!d) throw ParseError(path.string(), lineno, "invalid number");
          values[i] = *d;
        }
      }
      out.points.emplace_back(values[ix], values[iy], values[iz]);
      if (has_normals) {
        out.normals.push_back(
            checked_normal(Vec3(values[inx], values[iny], values[inz]), path, lineno));
      }
      if (has_colors) {
        out.colors.push_back({static_cast<unsigned char>(values[ir]),
                              static_cast<unsigned char>(values[ig]),
                              static_cast<unsigned char>(values[ib])});
      }
    }
    break;
  }
  if (out.points.empty()) throw IoError(path.string() + ": file contains no points");
  return out;
}

std::string format_number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

CloudFormat format_from_path(const fs::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".ply") return CloudFormat::ply;
  if (ext == ".xyz" || ext == ".txt" || ext == ".pts") return CloudFormat::xyz;
  throw InvalidArgument("cannot infer cloud format from " + path.string());
}

PointCloud load_cloud(const fs::path& path) { return load_cloud(path, format_from_path(path)); }

PointCloud load_cloud(const fs::path& path, CloudFormat format) {
  if (!fs::exists(path)) throw IoError("no such file: " + path.string());
  if (format == CloudFormat::xyz) return load_xyz(path);
  auto v = read_ply_vertices(path);
  std::optional<std::vector<Vec3>> normals;
  if (!v.normals.empty()) normals = std::move(v.normals);
  return PointCloud(std::move(v.points), std::move(normals));
}

std::vector<Vec3> load_normals(const fs::path& path) {
  std::vector<std::size_t> lines;
  const auto rows = read_rows(path, {3}, &lines);
  std::vector<Vec3> normals;
  normals.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    normals.push_back(checked_normal(Vec3(rows[i][0], rows[i][1], rows[i][2]), path, lines[i]));
  }
  return normals;
}

void save_normals(const std::vector<Vec3>& normals, const fs::path& path) {
  auto out = open_out(path);
  for (const auto& n : normals) {
    out << format_number(n.x()) << ' ' << format_number(n.y()) << ' ' << format_number(n.z())
        << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void save_cloud(const PointCloud& cloud, const fs::path& path) {
  {
    auto out = open_out(path);
    for (const auto& p : cloud.points()) {
      out << format_number(p.x()) << ' ' << format_number(p.y()) << ' ' << format_number(p.z())
          << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
  }
  if (cloud.has_normals()) save_normals(cloud.normals(), sidecar_path(path));
}

void save_ply(const std::vector<Vec3>& points, const fs::path& path,
              const PlyWriteOptions& options) {
  if (options.normals && options.normals->size() != points.size()) {
    throw InvalidArgument("normal count does not match point count");
  }
  if (options.colors && options.colors->size() != points.size()) {
    throw InvalidArgument("color count does not match point count");
  }
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out << "ply\n"
      << (options.binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
  for (const auto& c : options.comments) out << "comment " << c << '\n';
  out << "element vertex " << points.size() << '\n'
      << "property double x\nproperty double y\nproperty double z\n";
  if (options.normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
  if (options.colors) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";

  auto put = [&](double v) {
    if constexpr (std::endian::native == std::endian::little) {
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    } else {
      auto bytes = std::bit_cast<std::array<char, sizeof(double)>>(v);
      std::reverse(bytes.begin(), bytes.end());
      out.write(bytes.data(), bytes.size());
    }
  };
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (options.binary) {
      for (int a = 0; a < 3; ++a) put(points[i][a]);
      if (options.normals) {
        for (int a = 0; a < 3; ++a) put((*options.normals)[i][a]);
      }
      if (options.colors) {
        const auto& c = (*options.colors)[i];
        const char rgb[3] = {static_cast<char>(c.r), static_cast<char>(c.g), static_cast<char>(c.b)};
        out.write(rgb, 3);
      }
    } else {
      out << format_number(points[i].x()) << ' ' << format_number(points[i].y()) << ' '
          << format_number(points[i].z());
      if (options.normals) {
        const auto& n = (*options.normals)[i];
        out << ' ' << format_number(n.x()) << ' ' << format_number(n.y()) << ' '
            << format_number(n.z());
      }
      if (options.colors) {
        const auto& c = (*options.colors)[i];
        out << ' ' << int{c.r} << ' ' << int{c.g} << ' ' << int{c.b};
      }
      out << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::string> read_ply_comments(const fs::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  return read_ply_header(in, path).comments;
}

std::vector<Rgb> read_ply_colors(const fs::path& path) {
  return read_ply_vertices(path).colors;
}

}  // namespace nf::pointcloud
