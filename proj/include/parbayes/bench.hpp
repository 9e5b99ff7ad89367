#pragma once

// Flop benchmark sweep, CSV records, summary statistics and SVG plots.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "parbayes/io.hpp"
#include "parbayes/parallel.hpp"
#include "parbayes/pkf.hpp"
#include "parbayes/prts.hpp"
#include "parbayes/sequential.hpp"
#include "parbayes/ssm.hpp"

namespace parbayes {

inline constexpr const char* kBenchCsvHeader = "n,algorithm,work_flops,span_flops,wall_time_ns,block_l,seed";

struct BenchRecord {
  std::size_t n = 0;
  std::string algorithm;  // kf | pkf | rts | prts
  std::uint64_t work_flops = 0;
  std::uint64_t span_flops = 0;
  std::uint64_t wall_time_ns = 0;
  std::size_t block_l = 1;
  std::uint64_t seed = 0;
};

struct RunConfig {
  std::string model = "tracking";  // "tracking" or a JSON model/data file
  std::vector<std::size_t> ns;
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::size_t> blocks{1};
  std::filesystem::path out_dir = ".";
  unsigned threads = 1;
};

inline std::vector<std::size_t> default_sweep() {
  std::vector<std::size_t> ns;
  for (std::size_t p = 4; p <= 14; ++p) ns.push_back(std::size_t{1} << p);
  return ns;
}

inline void validate(const RunConfig& config) {
  if (config.ns.empty()) throw std::invalid_argument("config: empty n list");
  for (auto n : config.ns)
    if (n < 1) throw std::invalid_argument("config: n values must be at least 1");
  if (config.seeds.empty()) throw std::invalid_argument("config: empty seed list");
  if (config.blocks.empty()) throw std::invalid_argument("config: empty block list");
  for (auto b : config.blocks)
    if (b < 1) throw std::invalid_argument("config: block lengths must be at least 1");
}

// Model for a sweep point. Stationary file models are stretched to n steps.
inline LGSSM model_for(const RunConfig& config, std::size_t n) {
  if (config.model == "tracking") return make_default_tracking_model(n);
  LGSSM model = read_model_file(config.model);
  if (model.stationary()) {
    model.n = n;
  } else if (model.n != n) {
    throw std::invalid_argument("time-varying model in '" + config.model + "' has n=" + std::to_string(model.n) +
                                ", cannot run at n=" + std::to_string(n));
  }
  validate(model);
  return model;
}

namespace detail {

template <class F>
std::uint64_t timed(F&& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  const auto stop = std::chrono::steady_clock::now();
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count());
}

}  // namespace detail

// kf: Kalman filter including per-step log-likelihoods.
// pkf: parallel filter plus the parallel log-likelihood pass.
// rts / prts: smoothers fed by the sequential filter output (not counted).
inline std::vector<BenchRecord> run_bench(const RunConfig& config) {
  validate(config);
  const Executor exec(config.threads);
  std::vector<BenchRecord> out;
  for (std::size_t n : config.ns) {
    const LGSSM model = model_for(config, n);
    for (std::uint64_t seed : config.seeds) {
      const SimResult sim = simulate(model, seed);
      FlopLedger kf_ledger;
      FilterRun run;
      const auto kf_ns = detail::timed([&] { run = kalman_filter(model, sim.measurements, kf_ledger); });
      out.push_back({n, "kf", kf_ledger.total(), kf_ledger.total(), kf_ns, 1, seed});

      FlopLedger rts_ledger;
      const auto rts_ns = detail::timed([&] { rts_smoother(model, run, rts_ledger); });
      out.push_back({n, "rts", rts_ledger.total(), rts_ledger.total(), rts_ns, 1, seed});

      for (std::size_t block : config.blocks) {
        CostReport pkf_cost;
        const auto pkf_ns = detail::timed([&] {
          ParallelFilterResult pf = parallel_filter(model, sim.measurements, block, exec);
          LogLikResult ll = parallel_loglik(model, pf.filtered, sim.measurements, exec);
          pkf_cost = std::move(pf.cost);
          pkf_cost.append(ll.cost);
        });
        out.push_back({n, "pkf", pkf_cost.work_flops, pkf_cost.span_flops, pkf_ns, block, seed});

        CostReport prts_cost;
        const auto prts_ns = detail::timed([&] {
          prts_cost = parallel_smoother(model, run.filtered, block, exec).cost;
        });
        out.push_back({n, "prts", prts_cost.work_flops, prts_cost.span_flops, prts_ns, block, seed});
      }
    }
  }
  return out;
}

inline std::string bench_csv(const std::vector<BenchRecord>& records) {
  std::ostringstream os;
  os << kBenchCsvHeader << "\n";
  for (const auto& r : records)
    os << r.n << "," << r.algorithm << "," << r.work_flops << "," << r.span_flops << "," << r.wall_time_ns << ","
       << r.block_l << "," << r.seed << "\n";
  return os.str();
}

inline std::vector<BenchRecord> parse_bench_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  std::vector<BenchRecord> out;
  auto fail = [&](const std::string& what) {
    throw IoError("bench CSV line " + std::to_string(lineno) + ": " + what);
  };
  auto parse_u64 = [&](const std::string& cell, const char* field) -> std::uint64_t {
    if (cell.empty() || cell.find_first_not_of("0123456789") != std::string::npos)
      fail(std::string("field '") + field + "' is not a nonnegative integer: '" + cell + "'");
    try {
      return std::stoull(cell);
    } catch (const std::exception&) {
      fail(std::string("field '") + field + "' out of range");
    }
    return 0;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kBenchCsvHeader) fail("expected header '" + std::string(kBenchCsvHeader) + "'");
      header_seen = true;
      continue;
    }
    const auto cells = split_csv_line(line);
    if (cells.size() != 7) fail("expected 7 fields, got " + std::to_string(cells.size()));
    BenchRecord r;
    r.n = parse_u64(cells[0], "n");
    r.algorithm = cells[1];
    if (r.algorithm != "kf" && r.algorithm != "pkf" && r.algorithm != "rts" && r.algorithm != "prts")
      fail("unknown algorithm '" + r.algorithm + "'");
    r.work_flops = parse_u64(cells[2], "work_flops");
    r.span_flops = parse_u64(cells[3], "span_flops");
    r.wall_time_ns = parse_u64(cells[4], "wall_time_ns");
    r.block_l = parse_u64(cells[5], "block_l");
    r.seed = parse_u64(cells[6], "seed");
    if (r.n < 1) fail("n must be at least 1");
    if (r.span_flops > r.work_flops) fail("span_flops exceeds work_flops");
    out.push_back(std::move(r));
  }
  if (!header_seen) throw IoError("bench CSV: missing header");
  return out;
}

struct PairSummary {
  std::string sequential;
  std::string parallel;
  // Smallest swept n from which parallel span stays below sequential work.
  std::optional<std::size_t> crossover_n;
  std::map<std::size_t, double> work_ratio;  // work(parallel) / work(sequential)
  std::map<std::size_t, double> seq_work, par_work, par_span;
  double asymptotic_work_ratio = 0.0;  // at the largest n
};

struct BenchSummary {
  PairSummary filter;
  PairSummary smoother;
};

namespace detail {

// Mean flops per n for one algorithm; parallel algorithms use the smallest
// block length present at that n.
inline std::map<std::size_t, std::pair<double, double>> mean_flops(const std::vector<BenchRecord>& records,
                                                                  const std::string& algorithm) {
  std::map<std::size_t, std::size_t> min_block;
  for (const auto& r : records)
    if (r.algorithm == algorithm) {
      auto [it, fresh] = min_block.emplace(r.n, r.block_l);
      if (!fresh) it->second = std::min(it->second, r.block_l);
    }
  std::map<std::size_t, std::pair<double, double>> sums;
  std::map<std::size_t, std::size_t> counts;
  for (const auto& r : records) {
    if (r.algorithm != algorithm || r.block_l != min_block[r.n]) continue;
    auto& s = sums[r.n];
    s.first += static_cast<double>(r.work_flops);
    s.second += static_cast<double>(r.span_flops);
    ++counts[r.n];
  }
  for (auto& [n, s] : sums) {
    s.first /= static_cast<double>(counts[n]);
    s.second /= static_cast<double>(counts[n]);
  }
  return sums;
}

inline PairSummary summarize_pair(const std::vector<BenchRecord>& records, const std::string& seq,
                                  const std::string& par) {
  PairSummary s{seq, par, std::nullopt, {}, {}, {}, {}, 0.0};
  const auto sf = mean_flops(records, seq);
  const auto pf = mean_flops(records, par);
  std::vector<std::size_t> common;
  for (const auto& [n, v] : sf)
    if (pf.count(n)) common.push_back(n);
  for (std::size_t n : common) {
    s.seq_work[n] = sf.at(n).first;
    s.par_work[n] = pf.at(n).first;
    s.par_span[n] = pf.at(n).second;
    s.work_ratio[n] = s.par_work[n] / s.seq_work[n];
  }
  for (auto it = common.rbegin(); it != common.rend(); ++it) {
    if (s.par_span[*it] < s.seq_work[*it])
      s.crossover_n = *it;
    else
      break;
  }
  if (!common.empty()) s.asymptotic_work_ratio = s.work_ratio[common.back()];
  return s;
}

}  // namespace detail

inline BenchSummary summarize(const std::vector<BenchRecord>& records) {
  if (records.empty()) throw std::invalid_argument("summarize: empty sweep");
  return {detail::summarize_pair(records, "kf", "pkf"), detail::summarize_pair(records, "rts", "prts")};
}

inline Json to_json(const PairSummary& s) {
  Json ratios = Json::array();
  for (const auto& [n, r] : s.work_ratio) ratios.push_back({{"n", n}, {"work_ratio", r}});
  Json crossover = s.crossover_n ? Json(*s.crossover_n) : Json(nullptr);
  return {{"sequential", s.sequential},
          {"parallel", s.parallel},
          {"crossover_n", crossover},
          {"asymptotic_work_ratio", s.asymptotic_work_ratio},
          {"work_ratios", std::move(ratios)}};
}

inline Json to_json(const BenchSummary& s) { return {{"filter", to_json(s.filter)}, {"smoother", to_json(s.smoother)}}; }

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
  std::string color;
};

// Line plot with log10 x axis and, optionally, log10 y axis.
inline std::string render_svg(const std::string& title, const std::string& y_label,
                              const std::vector<PlotSeries>& series, bool log_y) {
  constexpr double W = 640, H = 420, left = 80, right = 160, top = 40, bottom = 60;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  auto ty = [&](double y) { return log_y ? std::log10(y) : y; };
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      if (x <= 0 || (log_y && y <= 0)) continue;
      xmin = std::min(xmin, std::log10(x));
      xmax = std::max(xmax, std::log10(x));
      ymin = std::min(ymin, ty(y));
      ymax = std::max(ymax, ty(y));
    }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax - xmin < 1e-12) xmax = xmin + 1;
  if (ymax - ymin < 1e-12) ymax = ymin + 1;
  if (!log_y) ymin = std::min(ymin, 0.0);
  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double x) { return left + (std::log10(x) - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + ph - (ty(y) - ymin) / (ymax - ymin) * ph; };

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int e = static_cast<int>(std::ceil(xmin)); e <= static_cast<int>(std::floor(xmax)); ++e) {
    const double x = left + (e - xmin) / (xmax - xmin) * pw;
    os << "<line x1=\"" << x << "\" y1=\"" << top + ph << "\" x2=\"" << x << "\" y2=\"" << top + ph + 5
       << "\" stroke=\"black\"/><text x=\"" << x << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">1e"
       << e << "</text>\n";
  }
  for (int t = 0; t <= 4; ++t) {
    const double v = ymin + (ymax - ymin) * t / 4.0;
    const double y = top + ph - (v - ymin) / (ymax - ymin) * ph;
    os << "<line x1=\"" << left - 5 << "\" y1=\"" << y << "\" x2=\"" << left << "\" y2=\"" << y
       << "\" stroke=\"black\"/><text x=\"" << left - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">";
    if (log_y)
      os << "1e" << std::setprecision(1) << v << std::setprecision(2);
    else
      os << v;
    os << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">n (time steps)</text>\n";
  os << "<text x=\"18\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << top + ph / 2 << ")\">" << y_label << "</text>\n";
  double legend_y = top + 10;
  for (const auto& s : series) {
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
    for (auto [x, y] : s.points)
      if (x > 0 && (!log_y || y > 0)) os << px(x) << "," << py(y) << " ";
    os << "\"/>\n";
    os << "<line x1=\"" << W - right + 10 << "\" y1=\"" << legend_y << "\" x2=\"" << W - right + 30 << "\" y2=\""
       << legend_y << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/><text x=\"" << W - right + 35
       << "\" y=\"" << legend_y + 4 << "\">" << s.label << "</text>\n";
    legend_y += 18;
  }
  os << "</svg>\n";
  return os.str();
}

namespace detail {

inline std::vector<std::pair<double, double>> points(const std::map<std::size_t, double>& m) {
  std::vector<std::pair<double, double>> out;
  for (const auto& [n, v] : m) out.emplace_back(static_cast<double>(n), v);
  return out;
}

}  // namespace detail

// Writes kf_flops.svg, rts_flops.svg, work_ratio.svg and summary.json into
// out_dir. Nothing is written for an empty sweep.
inline BenchSummary write_report(const std::vector<BenchRecord>& records, const std::filesystem::path& out_dir) {
  if (records.empty()) throw std::invalid_argument("report: empty sweep, nothing to plot");
  const BenchSummary s = summarize(records);
  std::filesystem::create_directories(out_dir);
  using detail::points;
  write_text(out_dir / "kf_flops.svg",
             render_svg("Kalman filter flops", "flops",
                        {{"KF", points(s.filter.seq_work), "#1f77b4"},
                         {"PKF span", points(s.filter.par_span), "#d62728"},
                         {"PKF work", points(s.filter.par_work), "#2ca02c"}},
                        true));
  write_text(out_dir / "rts_flops.svg",
             render_svg("RTS smoother flops", "flops",
                        {{"RTS", points(s.smoother.seq_work), "#1f77b4"},
                         {"PRTS span", points(s.smoother.par_span), "#d62728"},
                         {"PRTS work", points(s.smoother.par_work), "#2ca02c"}},
                        true));
  write_text(out_dir / "work_ratio.svg",
             render_svg("Parallel / sequential work", "work ratio",
                        {{"PKF / KF", points(s.filter.work_ratio), "#1f77b4"},
                         {"PRTS / RTS", points(s.smoother.work_ratio), "#d62728"}},
                        false));
  write_text(out_dir / "summary.json", to_json(s).dump(2) + "\n");
  return s;
}

}  // namespace parbayes
