#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sem/experiments.hpp"

namespace sem::report {

inline std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path, path);
  out << content;
  if (!out) throw Error(ErrorCode::io, "write failed for " + path, path);
}

inline std::string table1_csv(const std::vector<CellSummary>& cells) {
  std::string s = "mechanism,n,mean,sd,seeds\n";
  for (const auto& c : cells)
    s += std::string(to_string(c.mechanism)) + "," + std::to_string(c.n) + "," + fixed(c.mean) + "," + fixed(c.sd) +
         "," + std::to_string(c.seeds) + "\n";
  return s;
}

inline std::string runs_csv(const std::vector<RunSummary>& runs) {
  std::string s = "mechanism,n,seed,placement_rate,residuals,wall_seconds\n";
  for (const auto& r : runs) {
    std::string res;
    for (std::size_t k = 0; k < r.residuals.size(); ++k) res += (k ? ";" : "") + fixed(r.residuals[k]);
    s += std::string(to_string(r.mechanism)) + "," + std::to_string(r.n) + "," + std::to_string(r.seed) + "," +
         fixed(r.placement_rate) + "," + res + "," + fixed(r.wall_seconds, 4) + "\n";
  }
  return s;
}

inline std::string convergence_csv(const ConvergenceResult& res) {
  std::string s = "n,median,tail_fraction,runs\n";
  for (const auto& r : res.rows)
    s += std::to_string(r.n) + "," + fixed(r.median) + "," + fixed(r.tail_fraction) + "," +
         std::to_string(r.distances.size()) + "\n";
  return s;
}

inline std::string perturbation_csv(const PerturbationSummary& sum) {
  std::string s = "market,ties,mean_distance,preserved,clearing_error,failures\n";
  for (const auto& m : sum.markets)
    s += std::to_string(m.market) + "," + std::to_string(m.ties) + "," + fixed(m.mean_distance()) + "," +
         fixed(m.mean_preserved()) + "," + fixed(m.mean_clearing_error()) + "," + std::to_string(m.failures) + "\n";
  s += "all,," + fixed(sum.average_distance) + "," + fixed(sum.average_preserved) + "," +
       fixed(sum.average_clearing_error) + "," + std::to_string(sum.failures) + "\n";
  return s;
}

/// Gaussian kernel density on [0, 1] with Silverman's bandwidth.
inline std::vector<double> density_curve(const std::vector<double>& xs, std::size_t points) {
  std::vector<double> y(points, 0.0);
  if (xs.empty()) return y;
  const double sd = std::max(sample_sd(xs), 1e-3);
  const double h = 1.06 * sd * std::pow(static_cast<double>(xs.size()), -0.2);
  const double norm = 1.0 / (static_cast<double>(xs.size()) * h * std::sqrt(2.0 * M_PI));
  for (std::size_t i = 0; i < points; ++i) {
    const double at = static_cast<double>(i) / static_cast<double>(points - 1);
    for (double x : xs) y[i] += norm * std::exp(-0.5 * (at - x) * (at - x) / (h * h));
  }
  return y;
}

/// One panel per replica count with a placement-rate density per mechanism.
inline std::string density_svg(const std::vector<RunSummary>& runs) {
  std::map<int, std::map<Mechanism, std::vector<double>>> by;
  for (const auto& r : runs) by[r.n][r.mechanism].push_back(r.placement_rate);
  const int pw = 260, ph = 180, pad = 30;
  const int width = pad + static_cast<int>(by.size()) * (pw + pad);
  const int height = ph + 3 * pad;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c"};
  int panel = 0;
  for (const auto& [n, mechs] : by) {
    const int x0 = pad + panel * (pw + pad), y0 = pad;
    double top = 1e-9;
    std::map<Mechanism, std::vector<double>> curves;
    for (const auto& [m, xs] : mechs) {
      curves[m] = density_curve(xs, 101);
      for (double v : curves[m]) top = std::max(top, v);
    }
    o << "<g>\n<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
    o << "<text x=\"" << x0 + pw / 2 << "\" y=\"" << y0 - 8 << "\" text-anchor=\"middle\">n = " << n << "</text>\n";
    o << "<text x=\"" << x0 << "\" y=\"" << y0 + ph + 14 << "\">0</text><text x=\"" << x0 + pw - 6 << "\" y=\""
      << y0 + ph + 14 << "\">1</text>\n";
    int line = 0;
    for (const auto& [m, ys] : curves) {
      o << "<polyline fill=\"none\" stroke=\"" << colors[static_cast<int>(m) % 3] << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < ys.size(); ++i)
        o << fixed(x0 + pw * static_cast<double>(i) / static_cast<double>(ys.size() - 1), 1) << ","
          << fixed(y0 + ph - ph * 0.95 * ys[i] / top, 1) << " ";
      o << "\"/>\n";
      o << "<text x=\"" << x0 + 6 << "\" y=\"" << y0 + 14 + 13 * line++ << "\" fill=\""
        << colors[static_cast<int>(m) % 3] << "\">" << to_string(m) << "</text>\n";
    }
    o << "</g>\n";
    ++panel;
  }
  o << "<text x=\"" << width / 2 << "\" y=\"" << height - 6 << "\" text-anchor=\"middle\">placement rate</text>\n";
  o << "</svg>\n";
  return o.str();
}

}  // namespace sem::report
