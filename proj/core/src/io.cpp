#include "prism/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace prism {

namespace {

[[noreturn]] void io_fail(const std::string& what, const std::string& path) {
  throw std::runtime_error(what + ": " + path + " (" + std::strerror(errno) + ")");
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& token, const std::string& context) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(token, &pos);
    if (pos != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(context + ": bad number '" + token + "'");
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void atomic_write_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) io_fail("atomic_write_file: cannot open", tmp);
    out << content;
    out.flush();
    if (!out) io_fail("atomic_write_file: write failed", tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) io_fail("atomic_write_file: rename failed", path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail("read_text_file: cannot open", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_matrix_file(const std::string& path, const Matrix& m) {
  std::ostringstream out;
  out << m.rows() << ' ' << m.cols() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ' ';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  atomic_write_file(path, out.str());
}

Matrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) io_fail("read_matrix_file: cannot open", path);
  Index rows = 0, cols = 0;
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("read_matrix_file: empty file " + path);
  {
    std::istringstream hs(header);
    if (!(hs >> rows >> cols) || rows < 1 || cols < 1)
      throw std::runtime_error("read_matrix_file: bad header line 1 in " + path);
  }
  Matrix m(rows, cols);
  std::string line;
  for (Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line))
      throw std::runtime_error("read_matrix_file: truncated at line " + std::to_string(i + 2) +
                               " in " + path);
    std::istringstream ls(line);
    std::string token;
    for (Index j = 0; j < cols; ++j) {
      if (!(ls >> token))
        throw std::runtime_error("read_matrix_file: missing value at line " +
                                 std::to_string(i + 2) + " in " + path);
      m(i, j) = parse_double(token, path + ":" + std::to_string(i + 2));
    }
  }
  return m;
}

void write_manifest(const std::string& path, const Manifest& manifest) {
  std::ostringstream out;
  for (const auto& [key, value] : manifest) out << key << " = " << value << '\n';
  atomic_write_file(path, out.str());
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) io_fail("read_manifest: cannot open", path);
  Manifest manifest;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("read_manifest: missing '=' at line " + std::to_string(lineno) +
                               " in " + path);
    manifest[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return manifest;
}

std::string metric_csv_header() { return "method,seed,snr_db,n_samples,m_samples,mse"; }

std::string metric_csv_row(const MetricRecord& rec) {
  std::ostringstream out;
  out << rec.method << ',' << rec.seed << ',' << format_double(rec.snr_db) << ','
      << rec.n_samples << ',' << rec.m_samples << ',' << format_double(rec.mse);
  return out.str();
}

std::vector<MetricRecord> parse_metric_csv(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("parse_metric_csv: empty content");
  if (trim(line) != metric_csv_header())
    throw std::runtime_error("parse_metric_csv: unexpected header '" + line + "'");
  std::vector<MetricRecord> records;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 6)
      throw std::runtime_error("parse_metric_csv: expected 6 fields at line " +
                               std::to_string(lineno));
    MetricRecord rec;
    rec.method = fields[0];
    rec.seed = std::stoull(fields[1]);
    rec.snr_db = parse_double(fields[2], "metric csv line " + std::to_string(lineno));
    rec.n_samples = std::stoll(fields[3]);
    rec.m_samples = std::stoll(fields[4]);
    rec.mse = parse_double(fields[5], "metric csv line " + std::to_string(lineno));
    records.push_back(std::move(rec));
  }
  return records;
}

void write_metric_csv(const std::string& path, const std::vector<MetricRecord>& records) {
  std::ostringstream out;
  out << metric_csv_header() << '\n';
  for (const auto& rec : records) out << metric_csv_row(rec) << '\n';
  atomic_write_file(path, out.str());
}

void write_trajectory_csv(const std::string& path, const std::vector<EmIterationRecord>& trace) {
  std::ostringstream out;
  out << "iteration,q_value,mean_ess,h_frobenius_change\n";
  for (const auto& rec : trace)
    out << rec.iteration << ',' << format_double(rec.q_value) << ','
        << format_double(rec.mean_ess) << ',' << format_double(rec.h_change) << '\n';
  atomic_write_file(path, out.str());
}

std::vector<EmIterationRecord> parse_trajectory_csv(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "iteration,q_value,mean_ess,h_frobenius_change")
    throw std::runtime_error("parse_trajectory_csv: unexpected header");
  std::vector<EmIterationRecord> trace;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 4)
      throw std::runtime_error("parse_trajectory_csv: expected 4 fields at line " +
                               std::to_string(lineno));
    EmIterationRecord rec;
    rec.iteration = std::stoi(fields[0]);
    rec.q_value = parse_double(fields[1], "trajectory line " + std::to_string(lineno));
    rec.mean_ess = parse_double(fields[2], "trajectory line " + std::to_string(lineno));
    rec.h_change = parse_double(fields[3], "trajectory line " + std::to_string(lineno));
    trace.push_back(rec);
  }
  return trace;
}

}  // namespace prism
