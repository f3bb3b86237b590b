#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "darkspin/darkspin.h"
#include "json.hpp"

using json = nlohmann::ordered_json;

// exit 2
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// exit 3
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<int> lines;  // 1-based source line of each row
};

Table read_csv(const std::string& path);

struct CurveData {
  std::vector<double> t, y, err;
  std::string axis;  // t_us after normalisation, or freq_MHz
};

// Header t_us|t_ns|freq_MHz, signal[, sigma]. declared_unit: "us", "ns", "MHz" or empty.
CurveData ingest_curve(const std::string& path, const std::string& declared_unit);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);
void write_json(const std::string& path, const json& j);
json read_json(const std::string& path);

// Throws InputError / NumericError / runtime_error from a failing status.
void check(ds_status s, const std::string& what);

struct CurveDeleter {
  void operator()(ds_curve* c) const { ds_curve_free(c); }
};
struct FitDeleter {
  void operator()(ds_fit* f) const { ds_fit_free(f); }
};
using CurvePtr = std::unique_ptr<ds_curve, CurveDeleter>;
using FitPtr = std::unique_ptr<ds_fit, FitDeleter>;

CurvePtr make_curve(const CurveData& d);
CurveData read_curve(const ds_curve* c);
json fit_to_json(const ds_fit* f);
bool fit_converged(const ds_fit* f);

// finite doubles as numbers, everything else as null
json num(double v);
