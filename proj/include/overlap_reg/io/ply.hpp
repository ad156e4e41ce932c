#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "overlap_reg/error.hpp"
#include "overlap_reg/point_cloud.hpp"

namespace overlap_reg {

namespace ply_detail {

enum class ScalarType { i8, u8, i16, u16, i32, u32, f32, f64 };

inline std::size_t scalar_size(ScalarType t) {
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

inline ScalarType parse_scalar_type(const std::string& token, const std::string& path) {
  if (token == "char" || token == "int8") return ScalarType::i8;
  if (token == "uchar" || token == "uint8") return ScalarType::u8;
  if (token == "short" || token == "int16") return ScalarType::i16;
  if (token == "ushort" || token == "uint16") return ScalarType::u16;
  if (token == "int" || token == "int32") return ScalarType::i32;
  if (token == "uint" || token == "uint32") return ScalarType::u32;
  if (token == "float" || token == "float32") return ScalarType::f32;
  if (token == "double" || token == "float64") return ScalarType::f64;
  fail(ErrorCode::parse_error, path + ": unknown PLY property type '" + token + "'");
}

struct Property {
  std::string name;
  ScalarType type = ScalarType::f32;
  bool is_list = false;
  ScalarType count_type = ScalarType::u8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

struct Header {
  bool binary = false;
  std::vector<Element> elements;
  std::size_t body_offset = 0;  // bytes into the file
};

inline Header parse_header(const std::vector<char>& data, const std::string& path) {
  Header header;
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    if (pos >= data.size()) {
      fail(ErrorCode::parse_error, path + ": header truncated at byte " + std::to_string(pos));
    }
    std::size_t eol = pos;
    while (eol < data.size() && data[eol] != '\n') ++eol;
    std::string line(data.begin() + static_cast<std::ptrdiff_t>(pos),
                     data.begin() + static_cast<std::ptrdiff_t>(eol));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = eol + 1;
    return line;
  };

  if (next_line() != "ply") fail(ErrorCode::parse_error, path + ": missing 'ply' magic");
  bool have_format = false;
  for (;;) {
    const std::string line = next_line();
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword == "comment" || keyword == "obj_info" || keyword.empty()) continue;
    if (keyword == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii") {
        header.binary = false;
      } else if (fmt == "binary_little_endian") {
        header.binary = true;
      } else if (fmt == "binary_big_endian") {
        fail(ErrorCode::parse_error, path + ": big-endian PLY is not supported");
      } else {
        fail(ErrorCode::parse_error, path + ": unknown PLY format '" + fmt + "'");
      }
      have_format = true;
    } else if (keyword == "element") {
      Element e;
      ls >> e.name >> e.count;
      if (ls.fail()) fail(ErrorCode::parse_error, path + ": malformed element line '" + line + "'");
      header.elements.push_back(e);
    } else if (keyword == "property") {
      if (header.elements.empty()) {
        fail(ErrorCode::parse_error, path + ": property before any element");
      }
      std::string t1;
      ls >> t1;
      Property p;
      if (t1 == "list") {
        std::string count_t, value_t;
        ls >> count_t >> value_t >> p.name;
        p.is_list = true;
        p.count_type = parse_scalar_type(count_t, path);
        p.type = parse_scalar_type(value_t, path);
      } else {
        p.type = parse_scalar_type(t1, path);
        ls >> p.name;
      }
      if (ls.fail() || p.name.empty()) {
        fail(ErrorCode::parse_error, path + ": malformed property line '" + line + "'");
      }
      header.elements.back().properties.push_back(p);
    } else if (keyword == "end_header") {
      break;
    } else {
      fail(ErrorCode::parse_error, path + ": unexpected header keyword '" + keyword + "'");
    }
  }
  if (!have_format) fail(ErrorCode::parse_error, path + ": header missing format line");
  header.body_offset = pos;
  return header;
}

class BinaryCursor {
 public:
  BinaryCursor(const std::vector<char>& data, std::size_t offset, const std::string& path)
      : data_(data), pos_(offset), path_(path) {}

  std::size_t position() const { return pos_; }

  void skip(std::size_t bytes) {
    require(bytes);
    pos_ += bytes;
  }

  double read_scalar(ScalarType t) {
    const std::size_t bytes = scalar_size(t);
    require(bytes);
    const char* p = data_.data() + pos_;
    pos_ += bytes;
    switch (t) {
      case ScalarType::i8: return static_cast<double>(static_cast<std::int8_t>(*p));
      case ScalarType::u8: return static_cast<double>(static_cast<std::uint8_t>(*p));
      case ScalarType::i16: return static_cast<double>(load<std::int16_t>(p));
      case ScalarType::u16: return static_cast<double>(load<std::uint16_t>(p));
      case ScalarType::i32: return static_cast<double>(load<std::int32_t>(p));
      case ScalarType::u32: return static_cast<double>(load<std::uint32_t>(p));
      case ScalarType::f32: return static_cast<double>(load<float>(p));
      case ScalarType::f64: return load<double>(p);
    }
    return 0.0;
  }

 private:
  template <typename T>
  static T load(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;  // little-endian host assumed (checked nowhere else in tree)
  }

  void require(std::size_t bytes) {
    if (pos_ + bytes > data_.size()) {
      fail(ErrorCode::parse_error,
           path_ + ": truncated body at byte " + std::to_string(pos_) + ", " +
               std::to_string(pos_ + bytes - data_.size()) + " more bytes needed");
    }
  }

  const std::vector<char>& data_;
  std::size_t pos_;
  const std::string& path_;
};

inline std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, path + ": cannot open file");
  in.seekg(0, std::ios::end);
  const std::streamoff size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<char> data(static_cast<std::size_t>(size));
  if (size > 0) in.read(data.data(), size);
  if (!in) fail(ErrorCode::io_error, path + ": read failed");
  return data;
}

}  // namespace ply_detail

// Reads an ASCII or binary-little-endian PLY file. The vertex element must
// provide float/double x, y, z; a property named "intensity" is picked up
// when present, everything else (including other elements) is skipped.
inline PointCloud read_ply(const std::string& path) {
  using namespace ply_detail;
  const std::vector<char> data = slurp(path);
  const Header header = parse_header(data, path);

  const Element* vertex = nullptr;
  for (const Element& e : header.elements) {
    if (e.name == "vertex") {
      vertex = &e;
      break;
    }
  }
  if (vertex == nullptr) fail(ErrorCode::parse_error, path + ": no vertex element");

  int ix = -1, iy = -1, iz = -1, ii = -1;
  for (std::size_t p = 0; p < vertex->properties.size(); ++p) {
    const Property& prop = vertex->properties[p];
    if (prop.is_list) continue;
    if (prop.name == "x") ix = static_cast<int>(p);
    if (prop.name == "y") iy = static_cast<int>(p);
    if (prop.name == "z") iz = static_cast<int>(p);
    if (prop.name == "intensity") ii = static_cast<int>(p);
  }
  if (ix < 0 || iy < 0 || iz < 0) {
    fail(ErrorCode::parse_error, path + ": vertex element lacks x/y/z properties");
  }

  PointCloud cloud;
  cloud.points.reserve(vertex->count);
  if (ii >= 0) cloud.intensity.reserve(vertex->count);

  if (header.binary) {
    BinaryCursor cursor(data, header.body_offset, path);
    for (const Element& e : header.elements) {
      if (&e != vertex) {
        // Skip foreign elements property by property (lists preclude a
        // fixed stride).
        for (std::size_t r = 0; r < e.count; ++r) {
          for (const Property& prop : e.properties) {
            if (prop.is_list) {
              const double n = cursor.read_scalar(prop.count_type);
              cursor.skip(static_cast<std::size_t>(n) * scalar_size(prop.type));
            } else {
              cursor.skip(scalar_size(prop.type));
            }
          }
        }
        continue;
      }
      std::vector<double> row(e.properties.size(), 0.0);
      for (std::size_t r = 0; r < e.count; ++r) {
        for (std::size_t p = 0; p < e.properties.size(); ++p) {
          const Property& prop = e.properties[p];
          if (prop.is_list) {
            const double n = cursor.read_scalar(prop.count_type);
            cursor.skip(static_cast<std::size_t>(n) * scalar_size(prop.type));
          } else {
            row[p] = cursor.read_scalar(prop.type);
          }
        }
        cloud.points.emplace_back(row[static_cast<std::size_t>(ix)],
                                  row[static_cast<std::size_t>(iy)],
                                  row[static_cast<std::size_t>(iz)]);
        if (ii >= 0) cloud.intensity.push_back(row[static_cast<std::size_t>(ii)]);
      }
    }
  } else {
    // ASCII body: one whitespace-token stream, consumed element by element.
    std::istringstream body(std::string(data.begin() + static_cast<std::ptrdiff_t>(header.body_offset),
                                        data.end()));
    for (const Element& e : header.elements) {
      std::vector<double> row(e.properties.size(), 0.0);
      for (std::size_t r = 0; r < e.count; ++r) {
        for (std::size_t p = 0; p < e.properties.size(); ++p) {
          const Property& prop = e.properties[p];
          std::size_t values = 1;
          if (prop.is_list) {
            double n = 0.0;
            if (!(body >> n)) {
              fail(ErrorCode::parse_error,
                   path + ": truncated ASCII body in element '" + e.name + "' row " +
                       std::to_string(r));
            }
            values = static_cast<std::size_t>(n);
          }
          double v = 0.0;
          for (std::size_t j = 0; j < values; ++j) {
            if (!(body >> v)) {
              fail(ErrorCode::parse_error,
                   path + ": truncated ASCII body in element '" + e.name + "' row " +
                       std::to_string(r));
            }
          }
          if (!prop.is_list) row[p] = v;
        }
        if (&e == vertex) {
          cloud.points.emplace_back(row[static_cast<std::size_t>(ix)],
                                    row[static_cast<std::size_t>(iy)],
                                    row[static_cast<std::size_t>(iz)]);
          if (ii >= 0) cloud.intensity.push_back(row[static_cast<std::size_t>(ii)]);
        }
      }
    }
  }

  if (cloud.points.size() != vertex->count) {
    fail(ErrorCode::parse_error,
         path + ": vertex count mismatch: header says " + std::to_string(vertex->count) +
             ", body held " + std::to_string(cloud.points.size()));
  }
  validate(cloud, path);
  return cloud;
}

// Writes x, y, z (and intensity when present) at full double precision so a
// write/read round trip is bit-exact.
inline void write_ply(const std::string& path, const PointCloud& cloud, bool binary = true) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io_error, path + ": cannot open for writing");

  out << "ply\n";
  out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
  out << "element vertex " << cloud.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_intensity()) out << "property double intensity\n";
  out << "end_header\n";

  if (binary) {
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      std::array<double, 4> row{cloud.points[i].x(), cloud.points[i].y(), cloud.points[i].z(),
                                cloud.has_intensity() ? cloud.intensity[i] : 0.0};
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(sizeof(double) * (cloud.has_intensity() ? 4 : 3)));
    }
  } else {
    out.precision(17);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      out << cloud.points[i].x() << ' ' << cloud.points[i].y() << ' ' << cloud.points[i].z();
      if (cloud.has_intensity()) out << ' ' << cloud.intensity[i];
      out << '\n';
    }
  }
  if (!out) fail(ErrorCode::io_error, path + ": write failed");
}

}  // namespace overlap_reg
