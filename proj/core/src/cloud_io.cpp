// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include "treeskel/cloud_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <vector>

#include "treeskel/error.hpp"

namespace treeskel {
namespace {

std::vector<std::string> split_whitespace(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string token;
  while (in >> token) out.push_back(token);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    out.push_back(first == std::string::npos ? "" : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> parse_double(const std::string& text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

std::optional<std::int64_t> parse_int(const std::string& text) {
  std::int64_t value = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

bool is_integer_ply_type(const std::string& type) {
  static const std::array<std::string, 12> kIntTypes = {
      "char", "uchar", "short", "ushort", "int", "uint",
      "int8", "uint8", "int16", "uint16", "int32", "uint32"};
  return std::find(kIntTypes.begin(), kIntTypes.end(), type) != kIntTypes.end();
}

bool is_float_ply_type(const std::string& type) {
  return type == "float" || type == "double" || type == "float32" || type == "float64";
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Column roles shared by the PLY and CSV readers.
struct ColumnLayout {
  std::array<int, 3> xyz = {-1, -1, -1};
  std::array<int, 3> rgb = {-1, -1, -1};
  std::array<int, 3> normal = {-1, -1, -1};
  std::vector<std::pair<std::string, int>> fields;  // name, column
};

ColumnLayout classify_columns(const std::vector<std::string>& names) {
  ColumnLayout layout;
  for (std::size_t c = 0; c < names.size(); ++c) {
    const std::string name = lowercase(names[c]);
    const int col = static_cast<int>(c);
    if (name == "x") layout.xyz[0] = col;
    else if (name == "y") layout.xyz[1] = col;
    else if (name == "z") layout.xyz[2] = col;
    else if (name == "red" || name == "r") layout.rgb[0] = col;
    else if (name == "green" || name == "g") layout.rgb[1] = col;
    else if (name == "blue" || name == "b") layout.rgb[2] = col;
    else if (name == "nx") layout.normal[0] = col;
    else if (name == "ny") layout.normal[1] = col;
    else if (name == "nz") layout.normal[2] = col;
    else layout.fields.emplace_back(names[c], col);
  }
  return layout;
}

bool all_set(const std::array<int, 3>& cols) {
  return cols[0] >= 0 && cols[1] >= 0 && cols[2] >= 0;
}

bool any_set(const std::array<int, 3>& cols) {
  return cols[0] >= 0 || cols[1] >= 0 || cols[2] >= 0;
}

// Builds the cloud once every row has been tokenized and validated.
PointCloud assemble(const ColumnLayout& layout, const std::vector<std::vector<double>>& rows,
                    const std::vector<bool>& integer_columns,
                    std::map<std::string, std::string> metadata) {
  std::vector<Point> points;
  points.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    Point p;
    p.position = Vec3(row[layout.xyz[0]], row[layout.xyz[1]], row[layout.xyz[2]]);
    if (all_set(layout.rgb)) {
      p.color = Rgb{static_cast<std::uint8_t>(row[layout.rgb[0]]),
                    static_cast<std::uint8_t>(row[layout.rgb[1]]),
                    static_cast<std::uint8_t>(row[layout.rgb[2]])};
    }
    if (all_set(layout.normal)) {
      Vec3 n(row[layout.normal[0]], row[layout.normal[1]], row[layout.normal[2]]);
      if (n.norm() > 0.0) p.normal = n.normalized();
    }
    p.source_id = static_cast<std::int64_t>(i);
    points.push_back(std::move(p));
  }
  PointCloud cloud(std::move(points));
  for (const auto& [name, col] : layout.fields) {
    if (integer_columns[col]) {
      IntField values(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        values[i] = static_cast<std::int64_t>(rows[i][col]);
      }
      cloud.set_field(name, std::move(values));
    } else {
      RealField values(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) values[i] = rows[i][col];
      cloud.set_field(name, std::move(values));
    }
  }
  cloud.metadata() = std::move(metadata);
  return cloud;
}

void check_color_range(double value, std::size_t line) {
  if (value < 0.0 || value > 255.0 || value != static_cast<double>(static_cast<int>(value))) {
    throw ParseError("color channel out of range [0,255]", line);
  }
}

PointCloud load_ply(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") throw ParseError("missing 'ply' magic", 1);

  std::map<std::string, std::string> metadata;
  std::vector<std::string> names;
  std::vector<bool> integer_columns;
  std::optional<std::size_t> vertex_count;
  bool in_vertex = false;
  bool seen_format = false;
  while (true) {
    if (!next_line()) throw ParseError("unexpected end of header", line_no);
    const auto tokens = split_whitespace(line);
    if (tokens.empty()) continue;
    if (tokens[0] == "end_header") break;
    if (tokens[0] == "format") {
      if (tokens.size() < 2 || tokens[1] != "ascii") {
        throw ParseError("only ASCII PLY is supported", line_no);
      }
      seen_format = true;
    } else if (tokens[0] == "comment" || tokens[0] == "obj_info") {
      if (tokens.size() >= 3) {
        const auto pos = line.find(tokens[2], line.find(tokens[1]) + tokens[1].size());
        metadata[tokens[1]] = line.substr(pos);
      }
    } else if (tokens[0] == "element") {
      if (tokens.size() != 3) throw ParseError("malformed element line", line_no);
      if (vertex_count && !in_vertex) continue;
      in_vertex = tokens[1] == "vertex";
      if (in_vertex) {
        const auto count = parse_int(tokens[2]);
        if (!count || *count < 0) throw ParseError("invalid vertex count", line_no);
        vertex_count = static_cast<std::size_t>(*count);
      } else if (!vertex_count) {
        throw ParseError("elements before 'vertex' are not supported", line_no);
      }
    } else if (tokens[0] == "property") {
      if (!in_vertex) continue;
      if (tokens.size() != 3) throw ParseError("unsupported vertex property", line_no);
      if (!is_integer_ply_type(tokens[1]) && !is_float_ply_type(tokens[1])) {
        throw ParseError("unknown property type '" + tokens[1] + "'", line_no);
      }
      names.push_back(tokens[2]);
      integer_columns.push_back(is_integer_ply_type(tokens[1]));
    } else {
      throw ParseError("unknown header keyword '" + tokens[0] + "'", line_no);
    }
  }
  if (!seen_format) throw ParseError("missing format line", line_no);
  if (!vertex_count) throw ParseError("missing vertex element", line_no);

  const ColumnLayout layout = classify_columns(names);
  if (!all_set(layout.xyz)) throw ParseError("vertex element lacks x, y, z", line_no);
  if (any_set(layout.rgb) && !all_set(layout.rgb)) {
    throw ParseError("incomplete red/green/blue properties", line_no);
  }

  std::vector<std::vector<double>> rows;
  rows.reserve(*vertex_count);
  while (rows.size() < *vertex_count) {
    if (!next_line()) throw ParseError("fewer vertices than declared", line_no + 1);
    const auto tokens = split_whitespace(line);
    if (tokens.empty()) continue;
    if (tokens.size() != names.size()) {
      throw ParseError("expected " + std::to_string(names.size()) + " values, found " +
                           std::to_string(tokens.size()),
                       line_no);
    }
    std::vector<double> row(tokens.size());
    for (std::size_t c = 0; c < tokens.size(); ++c) {
      const auto value = parse_double(tokens[c]);
      if (!value) throw ParseError("non-numeric value '" + tokens[c] + "'", line_no);
      row[c] = *value;
    }
    for (int c : layout.rgb) {
      if (c >= 0) check_color_range(row[c], line_no);
    }
    rows.push_back(std::move(row));
  }
  return assemble(layout, rows, integer_columns, std::move(metadata));
}

PointCloud load_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> names;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    names = split_csv(line);
    break;
  }
  if (names.empty()) throw ParseError("missing CSV header row", std::max<std::size_t>(line_no, 1));

  const ColumnLayout layout = classify_columns(names);
  if (!all_set(layout.xyz)) throw ParseError("CSV header lacks x, y, z columns", line_no);
  if (any_set(layout.rgb) && !all_set(layout.rgb)) {
    throw ParseError("incomplete color columns", line_no);
  }

  std::vector<std::vector<double>> rows;
  std::vector<bool> integer_columns(names.size(), true);
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++row_no;
    const auto cells = split_csv(line);
    if (cells.size() != names.size()) {
      throw ParseError("row " + std::to_string(row_no) + ": expected " +
                           std::to_string(names.size()) + " columns, found " +
                           std::to_string(cells.size()),
                       line_no);
    }
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto value = parse_double(cells[c]);
      if (!value) {
        throw ParseError("row " + std::to_string(row_no) + ": non-numeric value '" + cells[c] +
                             "' in column '" + names[c] + "'",
                         line_no);
      }
      row[c] = *value;
      if (!parse_int(cells[c])) integer_columns[c] = false;
    }
    for (int c : layout.rgb) {
      if (c >= 0) check_color_range(row[c], line_no);
    }
    rows.push_back(std::move(row));
  }
  return assemble(layout, rows, integer_columns, {});
}

std::string format_real_cell(double value) {
  std::string text = format_double(value);
  // Keep real fields distinguishable from integer ones on reload.
  if (text.find_first_of(".eEn") == std::string::npos) text += ".0";
  return text;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

CloudFormat format_from_path(const std::filesystem::path& path) {
  const std::string ext = lowercase(path.extension().string());
  if (ext == ".ply") return CloudFormat::ply_ascii;
  if (ext == ".csv" || ext == ".xyz" || ext == ".txt") return CloudFormat::xyz_csv;
  throw ParameterError("cannot infer cloud format from '" + path.string() + "'");
}

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return format == CloudFormat::ply_ascii ? load_ply(in) : load_csv(in);
}

PointCloud load_cloud(const std::filesystem::path& path) {
  return load_cloud(path, format_from_path(path));
}

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  std::ofstream out = open_for_write(path);
  const bool color = cloud.has_color();
  const bool normals = cloud.has_normals();

  if (format == CloudFormat::ply_ascii) {
    out << "ply\nformat ascii 1.0\n";
    for (const auto& [key, value] : cloud.metadata()) out << "comment " << key << ' ' << value << '\n';
    out << "element vertex " << cloud.size() << '\n';
    out << "property double x\nproperty double y\nproperty double z\n";
    if (color) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    if (normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
    for (const auto& [name, values] : cloud.fields()) {
      out << "property " << (std::holds_alternative<IntField>(values) ? "int" : "double") << ' '
          << name << '\n';
    }
    out << "end_header\n";
  } else {
    out << "x,y,z";
    if (color) out << ",red,green,blue";
    if (normals) out << ",nx,ny,nz";
    for (const auto& [name, values] : cloud.fields()) out << ',' << name;
    out << '\n';
  }

  const char sep = format == CloudFormat::ply_ascii ? ' ' : ',';
  std::string row;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point& p = cloud[i];
    row.clear();
    row += format_double(p.position.x());
    row += sep;
    row += format_double(p.position.y());
    row += sep;
    row += format_double(p.position.z());
    if (color) {
      for (int v : {p.color->r, p.color->g, p.color->b}) {
        row += sep;
        row += std::to_string(v);
      }
    }
    if (normals) {
      for (int a = 0; a < 3; ++a) {
        row += sep;
        row += format_double((*p.normal)[a]);
      }
    }
    for (const auto& [name, values] : cloud.fields()) {
      row += sep;
      if (const auto* ints = std::get_if<IntField>(&values)) {
        row += std::to_string((*ints)[i]);
      } else {
        const double v = std::get<RealField>(values)[i];
        row += format == CloudFormat::ply_ascii ? format_double(v) : format_real_cell(v);
      }
    }
    row += '\n';
    out << row;
  }
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  save_cloud(cloud, path, format_from_path(path));
}

}  // namespace treeskel
