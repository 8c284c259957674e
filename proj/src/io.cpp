#include "weaksep/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace weaksep {
namespace {

using nlohmann::json;

constexpr const char* kMagic = "MWFD1";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Eigen::VectorXd to_vector(const json& arr, const std::string& field) {
  if (!arr.is_array()) throw Error("header field '" + field + "' must be an array");
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number())
      throw Error("header field '" + field + "' has a non-numeric entry");
    v(i) = arr[i].get<double>();
  }
  return v;
}

json from_vector(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

GridAxis axis_from_header(const json& header, const std::string& pts_field,
                          const std::string& w_field) {
  Eigen::VectorXd pts = to_vector(header.at(pts_field), pts_field);
  if (header.contains(w_field))
    return GridAxis(std::move(pts), to_vector(header[w_field], w_field));
  return GridAxis::trapezoid(std::move(pts));
}

// Parses the JSON header line and returns (header, offset of first payload byte).
std::pair<json, std::size_t> parse_header(const std::string& raw,
                                          const std::string& path) {
  std::size_t nl = raw.find('\n');
  if (nl == std::string::npos)
    throw Error(path + ": malformed header, no newline found in first " +
                std::to_string(raw.size()) + " bytes");
  json header;
  try {
    header = json::parse(raw.substr(0, nl));
  } catch (const json::parse_error& e) {
    throw Error(path + ": malformed header at byte " + std::to_string(e.byte) +
                ": " + e.what());
  }
  if (!header.is_object() || header.value("magic", "") != kMagic)
    throw Error(path + ": missing or wrong magic, expected \"MWFD1\"");
  return {std::move(header), nl + 1};
}

std::vector<double> read_payload(const std::string& raw, std::size_t offset,
                                 std::size_t count, const std::string& path) {
  const std::size_t avail = raw.size() - offset;
  if (avail != count * 8)
    throw Error(path + ": dimension mismatch, expected " +
                std::to_string(count * 8) + " payload bytes at byte " +
                std::to_string(offset) + ", found " + std::to_string(avail));
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    const unsigned char* p =
        reinterpret_cast<const unsigned char*>(raw.data() + offset + i * 8);
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | p[b];
    values[i] = std::bit_cast<double>(bits);
    if (!std::isfinite(values[i]))
      throw Error(path + ": non-finite value at byte " +
                  std::to_string(offset + i * 8));
  }
  return values;
}

void write_payload(std::ofstream& out, const std::vector<double>& values) {
  std::vector<unsigned char> buf(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) buf[i * 8 + b] = (bits >> (8 * b)) & 0xFF;
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
}

MultiwayDataset load_binary(const std::string& path) {
  std::string raw = read_file(path);
  auto [header, offset] = parse_header(raw, path);
  if (!header.contains("n"))
    throw Error(path + ": header field 'n' missing (phase tensors use n_T)");
  int n = header["n"].get<int>();
  if (n < 1) throw Error(path + ": subject count must be >= 1");
  GridAxis t_axis = axis_from_header(header, "t_points", "t_weights");

  std::vector<GridAxis> factors;
  GridAxis s_axis;
  if (header.contains("s_factors")) {
    for (const auto& f : header["s_factors"])
      factors.push_back(GridAxis::trapezoid(to_vector(f, "s_factors")));
    long prod = 1;
    for (const auto& f : factors) prod *= f.size();
    Eigen::VectorXd s_pts = to_vector(header.at("s_points"), "s_points");
    if (s_pts.size() != prod)
      throw Error(path + ": s_points length does not match product of s_factors");
    std::size_t count = static_cast<std::size_t>(n) * prod * t_axis.size();
    return vectorize_spatial(factors, t_axis, n,
                             read_payload(raw, offset, count, path));
  }
  s_axis = axis_from_header(header, "s_points", "s_weights");
  std::size_t count =
      static_cast<std::size_t>(n) * s_axis.size() * t_axis.size();
  return MultiwayDataset(std::move(s_axis), std::move(t_axis), n,
                         read_payload(raw, offset, count, path));
}

void save_binary(const MultiwayDataset& data, const std::string& path) {
  json header;
  header["magic"] = kMagic;
  header["n"] = data.n;
  header["s_points"] = from_vector(data.s_axis.points);
  header["t_points"] = from_vector(data.t_axis.points);
  header["s_weights"] = from_vector(data.s_axis.weights);
  header["t_weights"] = from_vector(data.t_axis.weights);
  if (!data.s_factors.empty()) {
    json factors = json::array();
    for (const auto& f : data.s_factors) factors.push_back(from_vector(f.points));
    header["s_factors"] = factors;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path);
  out << header.dump() << '\n';
  write_payload(out, data.values);
  if (!out) throw Error("write failed: " + path);
}

MultiwayDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "i,s_index,t_index,value")
    throw Error(path + ": line 1: expected header 'i,s_index,t_index,value'");

  struct Cell {
    long i, s, t;
    double v;
  };
  std::vector<Cell> cells;
  long max_i = -1, max_s = -1, max_t = -1;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Cell c;
    char trailing;
    if (std::sscanf(line.c_str(), "%ld,%ld,%ld,%lf%c", &c.i, &c.s, &c.t, &c.v,
                    &trailing) != 4)
      throw Error(path + ": line " + std::to_string(line_no) +
                  ": expected 'i,s_index,t_index,value'");
    if (c.i < 0 || c.s < 0 || c.t < 0)
      throw Error(path + ": line " + std::to_string(line_no) +
                  ": negative index");
    if (!std::isfinite(c.v))
      throw Error(path + ": line " + std::to_string(line_no) +
                  ": non-finite value");
    max_i = std::max(max_i, c.i);
    max_s = std::max(max_s, c.s);
    max_t = std::max(max_t, c.t);
    cells.push_back(c);
  }
  const long n = max_i + 1, S = max_s + 1, T = max_t + 1;
  if (n < 1 || S < 2 || T < 2)
    throw Error(path + ": too few rows to form a dataset (need |S|,|T| >= 2)");
  std::vector<double> values(static_cast<std::size_t>(n) * S * T);
  std::vector<bool> seen(values.size(), false);
  for (const auto& c : cells) {
    std::size_t pos = static_cast<std::size_t>(c.i) * S * T +
                      static_cast<std::size_t>(c.s) * T + c.t;
    if (seen[pos])
      throw Error(path + ": duplicate cell (i=" + std::to_string(c.i) +
                  ", s=" + std::to_string(c.s) + ", t=" + std::to_string(c.t) +
                  ")");
    seen[pos] = true;
    values[pos] = c.v;
  }
  if (cells.size() != values.size())
    throw Error(path + ": incomplete tensor, " +
                std::to_string(values.size() - cells.size()) +
                " cells missing for dims " + std::to_string(n) + "x" +
                std::to_string(S) + "x" + std::to_string(T));
  return MultiwayDataset(GridAxis::uniform01(static_cast<int>(S)),
                         GridAxis::uniform01(static_cast<int>(T)),
                         static_cast<int>(n), std::move(values));
}

void save_csv(const MultiwayDataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path);
  out << "i,s_index,t_index,value\n";
  out << std::setprecision(17);
  for (int i = 0; i < data.n; ++i)
    for (int s = 0; s < data.n_s(); ++s)
      for (int t = 0; t < data.n_t(); ++t)
        out << i << ',' << s << ',' << t << ',' << data.value(i, s, t) << '\n';
  if (!out) throw Error("write failed: " + path);
}

}  // namespace

MultiwayDataset load_dataset(const std::string& path, FileFormat format) {
  return format == FileFormat::binary ? load_binary(path) : load_csv(path);
}

void save_dataset(const MultiwayDataset& data, const std::string& path,
                  FileFormat format) {
  if (format == FileFormat::binary)
    save_binary(data, path);
  else
    save_csv(data, path);
}

PhaseTensor load_phase_tensor(const std::string& path) {
  std::string raw = read_file(path);
  auto [header, offset] = parse_header(raw, path);
  if (!header.contains("n_T"))
    throw Error(path + ": header field 'n_T' missing for a phase tensor");
  int n_trials = header["n_T"].get<int>();
  if (n_trials < 1) throw Error(path + ": trial count must be >= 1");
  GridAxis s_axis = axis_from_header(header, "s_points", "s_weights");
  GridAxis t_axis = axis_from_header(header, "t_points", "t_weights");
  std::size_t count =
      static_cast<std::size_t>(n_trials) * s_axis.size() * t_axis.size();
  return PhaseTensor(std::move(s_axis), std::move(t_axis), n_trials,
                     read_payload(raw, offset, count, path));
}

void save_phase_tensor(const PhaseTensor& tensor, const std::string& path) {
  json header;
  header["magic"] = kMagic;
  header["n_T"] = tensor.n_trials;
  header["s_points"] = from_vector(tensor.s_axis.points);
  header["t_points"] = from_vector(tensor.t_axis.points);
  header["s_weights"] = from_vector(tensor.s_axis.weights);
  header["t_weights"] = from_vector(tensor.t_axis.weights);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path);
  out << header.dump() << '\n';
  write_payload(out, tensor.phases);
  if (!out) throw Error("write failed: " + path);
}

}  // namespace weaksep
