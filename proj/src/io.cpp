#include "pvalfn/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "pvalfn/errors.hpp"

namespace pvalfn::io {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_number(const std::string& text) {
  if (text == "inf" || text == "+inf" || text == "Infinity") return std::numeric_limits<double>::infinity();
  if (text == "-inf" || text == "-Infinity") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* first = text.data();
  if (!text.empty() && text[0] == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("not a number: '" + text + "'");
  }
  return v;
}

bool is_number(const std::string& text) {
  try {
    parse_number(text);
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

}  // namespace

int Table::find(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

std::vector<double> Table::column(std::size_t j) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.at(j));
  return out;
}

Table read_table(std::istream& in) {
  Table t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::vector<std::string> cells = split(s, ',');
    if (t.columns.empty() && t.rows.empty() && !std::all_of(cells.begin(), cells.end(), is_number)) {
      t.columns = std::move(cells);
      continue;
    }
    if (!t.columns.empty() && cells.size() != t.columns.size()) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected " + std::to_string(t.columns.size()) +
                        " fields, got " + std::to_string(cells.size()));
    }
    if (!t.rows.empty() && cells.size() != t.rows.front().size()) {
      throw ConfigError("line " + std::to_string(line_no) + ": ragged row");
    }
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_number(c));
    t.rows.push_back(std::move(row));
  }
  if (t.rows.empty()) throw ConfigError("data contains no observations");
  return t;
}

Table read_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file '" + path + "'");
  return read_table(in);
}

Table parse_inline(const std::string& text, const std::vector<std::string>& columns) {
  Table t;
  t.columns = columns;
  if (text.find(';') == std::string::npos) {
    if (columns.size() != 1) throw ConfigError("inline data for this model needs rows separated by ';'");
    for (const auto& c : split(text, ',')) t.rows.push_back({parse_number(c)});
  } else {
    for (const auto& r : split(text, ';')) {
      if (r.empty()) continue;
      std::vector<double> row;
      for (const auto& c : split(r, ',')) row.push_back(parse_number(c));
      if (row.size() != columns.size()) {
        throw ConfigError("inline row '" + r + "' has " + std::to_string(row.size()) + " fields, expected " +
                          std::to_string(columns.size()));
      }
      t.rows.push_back(std::move(row));
    }
  }
  if (t.rows.empty()) throw ConfigError("inline data contains no observations");
  return t;
}

DataSet to_dataset(const Table& table, const std::vector<std::string>& columns) {
  std::vector<std::size_t> idx;
  bool by_name = !table.columns.empty();
  for (const auto& c : columns) {
    const int j = table.find(c);
    if (j < 0) {
      by_name = false;
      break;
    }
    idx.push_back(static_cast<std::size_t>(j));
  }
  if (!by_name) {
    const std::size_t width = table.rows.front().size();
    if (width < columns.size()) {
      throw ConfigError("data has " + std::to_string(width) + " columns, expected " + std::to_string(columns.size()));
    }
    idx.clear();
    for (std::size_t j = 0; j < columns.size(); ++j) idx.push_back(j);
  }
  DataSet y;
  y.rows = table.rows.size();
  y.cols = columns.size();
  for (const auto& r : table.rows) {
    for (std::size_t j : idx) y.obs.push_back(r[j]);
  }
  y.validate();
  return y;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

std::string data_digest(const DataSet& y) {
  std::string canonical = std::to_string(y.rows) + "x" + std::to_string(y.cols) + "\n";
  for (double v : y.obs) canonical += format_double(v) + "\n";

  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), canonical.data(), canonical.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) {
    throw NumericalError("SHA-256 computation failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

void write_curve_csv(std::ostream& out, const CurveFile& file) {
  for (const auto& [k, v] : file.metadata) out << "# " << k << ": " << v << '\n';
  for (std::size_t j = 0; j < file.columns.size(); ++j) out << (j ? "," : "") << file.columns[j];
  out << '\n';
  for (const auto& r : file.rows) {
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << format_double(r[j]);
    out << '\n';
  }
}

void write_curve_json(std::ostream& out, const CurveFile& file) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  for (const auto& [k, v] : file.metadata) meta[k] = v;
  j["metadata"] = meta;
  j["columns"] = file.columns;
  // Numbers go out as text so that infinities survive and digits match the CSV.
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : file.rows) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (double v : r) {
      if (std::isfinite(v)) {
        row.push_back(v);
      } else {
        row.push_back(format_double(v));
      }
    }
    rows.push_back(row);
  }
  j["rows"] = rows;
  out << j.dump(2) << '\n';
}

CurveFile read_curve_csv(std::istream& in) {
  CurveFile file;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = trim(std::string_view(line).substr(1));
      const auto colon = body.find(':');
      if (colon == std::string::npos) continue;
      file.metadata.emplace_back(trim(std::string_view(body).substr(0, colon)),
                                 trim(std::string_view(body).substr(colon + 1)));
      continue;
    }
    if (file.columns.empty()) {
      file.columns = split(line, ',');
      continue;
    }
    std::vector<double> row;
    for (const auto& c : split(line, ',')) row.push_back(c == "nan" ? std::nan("") : parse_number(c));
    file.rows.push_back(std::move(row));
  }
  return file;
}

CurveFile read_curve_json(std::istream& in) {
  const auto j = nlohmann::ordered_json::parse(in);
  CurveFile file;
  for (const auto& [k, v] : j.at("metadata").items()) file.metadata.emplace_back(k, v.get<std::string>());
  file.columns = j.at("columns").get<std::vector<std::string>>();
  for (const auto& r : j.at("rows")) {
    std::vector<double> row;
    for (const auto& v : r) row.push_back(v.is_string() ? parse_number(v.get<std::string>()) : v.get<double>());
    file.rows.push_back(std::move(row));
  }
  return file;
}

}  // namespace pvalfn::io
