#include "io.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace {

std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!s.empty() && s.back() == ',') out.push_back("");
  return out;
}

std::string where(const std::string& path, int line) { return path + ":" + std::to_string(line) + ": "; }

}  // namespace

Table read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  Table t;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;
    auto cells = split(s);
    if (t.header.empty()) {
      t.header = cells;
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw InputError(where(path, line) + "expected " + std::to_string(t.header.size()) + " columns, found " +
                       std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const char* b = cells[k].c_str();
      char* e = nullptr;
      double v = std::strtod(b, &e);
      if (cells[k].empty() || *e != '\0') {
        throw InputError(where(path, line) + "column '" + t.header[k] + "' is not a number: '" + cells[k] + "'");
      }
      if (!std::isfinite(v)) throw InputError(where(path, line) + "non-finite value in column '" + t.header[k] + "'");
      row.push_back(v);
    }
    t.rows.push_back(row);
    t.lines.push_back(line);
  }
  if (t.header.empty()) throw InputError(path + ": empty file");
  if (t.rows.empty()) throw InputError(path + ": no data rows");
  return t;
}

CurveData ingest_curve(const std::string& path, const std::string& declared) {
  Table tb = read_csv(path);
  if (tb.header.size() < 2 || tb.header.size() > 3) {
    throw InputError(path + ": header must be <axis>,signal[,sigma]");
  }
  const std::string& axis = tb.header[0];
  std::string unit;
  if (axis == "t_us") unit = "us";
  else if (axis == "t_ns") unit = "ns";
  else if (axis == "freq_MHz") unit = "MHz";
  else throw InputError(path + ": first column must be t_us, t_ns or freq_MHz, found '" + axis + "'");
  if (!declared.empty() && declared != unit) {
    throw InputError(path + ": unit mismatch, header says " + unit + " but " + declared + " was declared");
  }
  double scale = unit == "ns" ? 1e-3 : 1.0;
  CurveData d;
  d.axis = unit == "MHz" ? "freq_MHz" : "t_us";
  for (std::size_t i = 0; i < tb.rows.size(); ++i) {
    const auto& r = tb.rows[i];
    double t = r[0] * scale;
    if (!d.t.empty()) {
      if (t == d.t.back()) throw InputError(where(path, tb.lines[i]) + "duplicate " + axis + " value");
      if (t < d.t.back()) throw InputError(where(path, tb.lines[i]) + axis + " is not increasing");
    }
    d.t.push_back(t);
    d.y.push_back(r[1]);
    if (r.size() == 3) {
      if (!(r[2] > 0.0)) throw InputError(where(path, tb.lines[i]) + "sigma must be positive");
      d.err.push_back(r[2]);
    }
  }
  return d;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << "\n" << std::setprecision(17);
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < r.size(); ++k) out << (k ? "," : "") << r[k];
    out << "\n";
  }
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

void check(ds_status s, const std::string& what) {
  if (s == DS_OK) return;
  std::string msg = what + ": " + ds_status_name(s) + ": " + ds_last_error();
  switch (s) {
    case DS_ERR_NON_CONVERGENCE:
    case DS_ERR_UNIDENTIFIABLE:
    case DS_ERR_INTEGRATION:
    case DS_ERR_TRUNCATION:
    case DS_ERR_NO_SOLUTION:
      throw NumericError(msg);
    case DS_ERR_INTERNAL:
      throw std::runtime_error(msg);
    default:
      throw InputError(msg);
  }
}

CurvePtr make_curve(const CurveData& d) {
  ds_curve* c = nullptr;
  check(ds_curve_create(d.t.data(), d.y.data(), d.err.empty() ? nullptr : d.err.data(), d.t.size(), &c), "curve");
  return CurvePtr(c);
}

CurveData read_curve(const ds_curve* c) {
  CurveData d;
  std::size_t n = ds_curve_size(c);
  d.t.resize(n);
  d.y.resize(n);
  if (ds_curve_has_errors(c)) d.err.resize(n);
  check(ds_curve_read(c, d.t.data(), d.y.data(), d.err.empty() ? nullptr : d.err.data()), "curve");
  return d;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json fit_to_json(const ds_fit* f) {
  json params = json::array();
  for (std::size_t i = 0; i < ds_fit_param_count(f); ++i) {
    double v, e, g;
    ds_fit_param(f, i, &v, &e, &g);
    params.push_back({{"name", ds_fit_param_name(f, i)}, {"value", num(v)}, {"error", num(e)}, {"gn_error", num(g)}});
  }
  double res;
  int n, dropped, conv, it;
  ds_fit_summary(f, &res, &n, &dropped, &conv, &it);
  json warn = json::array();
  for (std::size_t i = 0; i < ds_fit_warning_count(f); ++i) warn.push_back(ds_fit_warning(f, i));
  return {{"model", ds_fit_model(f)}, {"parameters", params}, {"residual", num(res)}, {"n_points", n},
          {"dropped", dropped},       {"converged", conv != 0}, {"iterations", it},      {"warnings", warn}};
}

bool fit_converged(const ds_fit* f) {
  int conv = 0;
  ds_fit_summary(f, nullptr, nullptr, nullptr, &conv, nullptr);
  return conv != 0;
}
